"""Four-wire radial feeder model and its plain-text description format.

A feeder is a tree of buses rooted at bus 1 (the slack bus, held at a fixed
balanced three-phase voltage with the neutral at zero volts). Every line
carries three phase conductors with one common impedance plus an explicit
neutral conductor with its own impedance.

File grammar (one statement per line, ``#`` starts a comment)::

    slack_voltage <volts>              # required, phase-to-neutral magnitude
    v_base <volts>                     # optional, defaults to slack_voltage
    transformer_reactance <ohms>       # optional, recorded but not solved
    neutral_scale <factor>             # optional, default 1.0 (z_n = z_phase)
    line <from> <to> <r_ph> <x_ph> [<r_n> <x_n>]

Per-line neutral columns override ``neutral_scale``. The upstream transformer
reactance is recorded only: the slack voltage is fixed at bus 1, so any
series impedance above it is unobservable downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

PHASES = ("a", "b", "c")
WIRES = ("a", "b", "c", "n")
SLACK_BUS = 1


class FeederFormatError(ValueError):
    """A feeder file could not be parsed."""


class TopologyError(ValueError):
    """The described network is not a connected radial tree rooted at bus 1."""


@dataclass(frozen=True)
class LineSegment:
    """One feeder segment: three identical phase conductors plus a neutral."""

    from_bus: int
    to_bus: int
    z_phase: complex
    z_neutral: complex

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise TopologyError(f"line {self.from_bus}->{self.to_bus} is a self loop")
        if self.z_phase.real < 0 or self.z_neutral.real < 0:
            raise TopologyError(
                f"line {self.from_bus}->{self.to_bus} has negative resistance"
            )


@dataclass(frozen=True)
class NetworkTopology:
    """Immutable radial feeder: buses 1..N, N-1 lines, slack at bus 1.

    Derived lookups (parents, children, sweep order) are cached; instances
    are safe to share across concurrent scenario evaluations.
    """

    lines: tuple[LineSegment, ...]
    slack_voltage_magnitude: float = 220.0
    v_base: float = 220.0
    transformer_reactance: float = 0.0

    def __post_init__(self):
        if self.slack_voltage_magnitude <= 0 or self.v_base <= 0:
            raise TopologyError("slack voltage and v_base must be positive")
        n = self.n_buses
        seen: dict[tuple[int, int], int] = {}
        parent: dict[int, int] = {}
        for k, ln in enumerate(self.lines):
            if not (1 <= ln.from_bus <= n and 1 <= ln.to_bus <= n):
                raise TopologyError(f"line {ln.from_bus}->{ln.to_bus}: bus out of range 1..{n}")
            key = (ln.from_bus, ln.to_bus)
            if key in seen or (ln.to_bus, ln.from_bus) in seen:
                raise TopologyError(f"duplicate line {ln.from_bus}->{ln.to_bus}")
            seen[key] = k
            if ln.to_bus == SLACK_BUS:
                raise TopologyError(f"line {ln.from_bus}->{ln.to_bus} gives the slack bus a parent")
            if ln.to_bus in parent:
                raise TopologyError(
                    f"bus {ln.to_bus} has two parents ({parent[ln.to_bus]} and {ln.from_bus})"
                )
            parent[ln.to_bus] = ln.from_bus
        if len(self.lines) != n - 1:
            raise TopologyError(f"{n} buses need {n - 1} lines, found {len(self.lines)}")
        # reachability from the slack proves the tree is connected and acyclic
        order = self._walk()
        if len(order) != n:
            missing = sorted(set(self.buses) - set(order))
            raise TopologyError(f"buses {missing} are not connected to bus {SLACK_BUS}")

    @property
    def n_buses(self) -> int:
        if not self.lines:
            return 1
        return max(max(ln.from_bus, ln.to_bus) for ln in self.lines)

    @property
    def buses(self) -> tuple[int, ...]:
        return tuple(range(1, self.n_buses + 1))

    def _walk(self) -> list[int]:
        kids: dict[int, list[int]] = {b: [] for b in range(1, self.n_buses + 1)}
        for ln in self.lines:
            kids[ln.from_bus].append(ln.to_bus)
        order, stack = [], [SLACK_BUS]
        while stack:
            b = stack.pop()
            order.append(b)
            stack.extend(reversed(kids[b]))
        return order

    @cached_property
    def children_map(self) -> dict[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {b: [] for b in self.buses}
        for ln in self.lines:
            kids[ln.from_bus].append(ln.to_bus)
        return {b: tuple(sorted(v)) for b, v in kids.items()}

    @cached_property
    def parent_line_index(self) -> dict[int, int]:
        """Bus -> index into `lines` of the segment feeding it (slack absent)."""
        return {ln.to_bus: k for k, ln in enumerate(self.lines)}

    @cached_property
    def sweep_order(self) -> tuple[int, ...]:
        """Buses in root-first traversal order; reverse it for backward sweeps."""
        return tuple(self._walk())


def children(topology: NetworkTopology, bus: int) -> tuple[int, ...]:
    """Buses fed directly from `bus`; empty for leaves."""
    try:
        return topology.children_map[bus]
    except KeyError:
        raise TopologyError(f"unknown bus {bus}") from None


@dataclass
class _Header:
    slack_voltage: float | None = None
    v_base: float | None = None
    transformer_reactance: float = 0.0
    neutral_scale: float = 1.0


def _parse_feeder_text(text: str, source: str) -> NetworkTopology:
    hdr = _Header()
    raw_lines: list[tuple[int, tuple[int, int, complex, complex | None]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        parts = stmt.split()
        key = parts[0]
        try:
            if key == "slack_voltage":
                hdr.slack_voltage = float(parts[1])
            elif key == "v_base":
                hdr.v_base = float(parts[1])
            elif key == "transformer_reactance":
                hdr.transformer_reactance = float(parts[1])
            elif key == "neutral_scale":
                hdr.neutral_scale = float(parts[1])
            elif key == "line":
                if len(parts) not in (5, 7):
                    raise IndexError
                f, t = int(parts[1]), int(parts[2])
                zp = complex(float(parts[3]), float(parts[4]))
                zn = complex(float(parts[5]), float(parts[6])) if len(parts) == 7 else None
                raw_lines.append((lineno, (f, t, zp, zn)))
            else:
                raise FeederFormatError(f"{source}:{lineno}: unknown keyword {key!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FeederFormatError):
                raise
            raise FeederFormatError(f"{source}:{lineno}: malformed row {stmt!r}") from exc
    if hdr.slack_voltage is None:
        raise FeederFormatError(f"{source}: missing slack_voltage header")
    v_base = hdr.v_base if hdr.v_base is not None else hdr.slack_voltage

    segments = []
    for lineno, (f, t, zp, zn) in raw_lines:
        if zn is None:
            zn = hdr.neutral_scale * zp
        try:
            segments.append(LineSegment(f, t, zp, zn))
        except TopologyError as exc:
            raise TopologyError(f"{source}:{lineno}: {exc}") from None
    return NetworkTopology(
        lines=tuple(segments),
        slack_voltage_magnitude=hdr.slack_voltage,
        v_base=v_base,
        transformer_reactance=hdr.transformer_reactance,
    )


def load_topology(feeder_file: str | Path) -> NetworkTopology:
    """Load and validate a feeder description file.

    Raises FeederFormatError for malformed rows (with file and line number)
    and TopologyError when the rows do not form a radial tree rooted at bus 1.
    """
    path = Path(feeder_file)
    return _parse_feeder_text(path.read_text(), str(path))


def format_topology(topology: NetworkTopology) -> str:
    """Serialize a topology; load_topology(format_topology(t)) == t."""
    out = [
        f"slack_voltage {topology.slack_voltage_magnitude!r}",
        f"v_base {topology.v_base!r}",
        f"transformer_reactance {topology.transformer_reactance!r}",
    ]
    for ln in topology.lines:
        out.append(
            f"line {ln.from_bus} {ln.to_bus} "
            f"{ln.z_phase.real!r} {ln.z_phase.imag!r} "
            f"{ln.z_neutral.real!r} {ln.z_neutral.imag!r}"
        )
    return "\n".join(out) + "\n"


def save_topology(topology: NetworkTopology, path: str | Path) -> None:
    Path(path).write_text(format_topology(topology))


def loads_topology(text: str) -> NetworkTopology:
    """Parse a feeder description from a string (used by round-trip checks)."""
    return _parse_feeder_text(text, "<string>")
