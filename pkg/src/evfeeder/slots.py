"""Quarter-hour time slots on a wrap-around study day.

The horizon is a single day of 96 slots of 15 minutes; slot 0 starts at
00:00 and all slot arithmetic is modulo 96.
"""

from __future__ import annotations

SLOTS_PER_DAY = 96
SLOT_HOURS = 0.25


def slot_of(text: str) -> int:
    """Parse "HH:MM" into a slot index. "24:00" wraps to slot 0.

    Minutes must be a multiple of 15.
    """
    try:
        hh, mm = text.strip().split(":")
        hours, minutes = int(hh), int(mm)
    except ValueError as exc:
        raise ValueError(f"bad time {text!r}, expected HH:MM") from exc
    if not (0 <= hours <= 24 and 0 <= minutes < 60):
        raise ValueError(f"bad time {text!r}")
    if minutes % 15 != 0:
        raise ValueError(f"bad time {text!r}: minutes must be a multiple of 15")
    return (hours * 4 + minutes // 15) % SLOTS_PER_DAY


def time_of(slot: int) -> str:
    """Format a slot index as "HH:MM"."""
    slot = slot % SLOTS_PER_DAY
    return f"{slot // 4:02d}:{(slot % 4) * 15:02d}"


def slot_of_hours(hours: float) -> int:
    """Round a clock time in hours to the nearest slot, modulo one day."""
    return int(hours * 4 + 0.5) % SLOTS_PER_DAY


def window_slots(start: int, length: int) -> list[int]:
    """Slot indices covered by a window of `length` slots starting at `start`."""
    return [(start + k) % SLOTS_PER_DAY for k in range(length)]
