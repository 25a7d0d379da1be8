#!/usr/bin/env python3
"""Compare a shipped-configuration sweep against the published study values.

The reference study reports daily wasted energy per charging mode and the
worst-bus per-unit voltages, but never tabulates its base load curve, so its
exact numbers are not reproducible from the printed data alone. Two further
inconsistencies in the printed data are worth knowing about before reading
the table this script prints:

* The published worst-case voltages cannot be produced by the published
  feeder impedances: a 3.5 kW single-phase wallbox behind the printed
  1.7340-ohm branch (bus 10) cannot be served at all once the neutral
  return is included (maximum power transfer is about 3.0 kW), and even
  with an ideal neutral its service voltage falls far below the published
  0.88-0.92 pu band whenever it charges.
* The published loss figures imply a nearly flat load profile at the
  2 kW peak, which contradicts the published worst-case voltages by a wide
  margin (the same loading would sag the feeder to about 0.8 pu).

The shipped defaults therefore calibrate the untabulated curve (700 W peak,
same shape) and the unprinted neutral impedance (2% of phase) so that the
published EV roster is servable and the no-EV base case lands close to the
published 0.9389 pu minimum. Strategy ORDERINGS reproduce; absolute losses
sit well below the reference, in proportion to the lighter calibrated curve.

Usage: python scripts/compare_reference.py [--seed N] [--curve PATH] [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from evfeeder.metrics import compare_scenarios
from evfeeder.scenario import ScenarioConfig, run_sweep

# Published reference targets: daily losses in kWh and worst-bus voltages in
# pu for the five modes (no EVs, uncontrolled, timer, zoned, semi-smart).
REFERENCE = {
    "baseline": {"loss_kwh": 192.803, "min_v": (0.9489, 0.9409, 0.9389), "overall": 0.9389},
    "uncontrolled": {"loss_kwh": 287.249, "min_v": (0.8962, 0.8963, 0.9205), "overall": 0.8962},
    "timer": {"loss_kwh": 271.949, "min_v": (0.9172, 0.9000, 0.8829), "overall": 0.8829},
    "zoned": {"loss_kwh": 265.830, "min_v": (0.9195, 0.9106, 0.9064), "overall": 0.9064},
    "semismart": {"loss_kwh": 256.240, "min_v": (0.9225, 0.9121, 0.9229), "overall": 0.9121},
}
LOSS_BAND = 0.20   # expected relative agreement on losses for a matching curve
VOLT_BAND = 0.03   # expected absolute agreement on minima, pu


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--curve", type=Path, help="alternate base curve file")
    parser.add_argument("--out", type=Path, help="also write the sweep outputs here")
    args = parser.parse_args(argv)

    cfg = ScenarioConfig(seed=args.seed, curve=args.curve, out_dir=args.out)
    reports = run_sweep(cfg)

    print(f"{'scenario':<13} {'loss kWh':>9} {'ref kWh':>9} {'dev':>7}   "
          f"{'min V pu':>8} {'ref pu':>7} {'dev pu':>7}  bands")
    in_loss_band = in_volt_band = 0
    for name, ref in REFERENCE.items():
        r = reports[name]
        loss = r.total_loss_kwh
        minv = r.min_voltage["overall"].value_pu
        loss_dev = (loss - ref["loss_kwh"]) / ref["loss_kwh"]
        volt_dev = minv - ref["overall"]
        loss_ok = abs(loss_dev) <= LOSS_BAND
        volt_ok = abs(volt_dev) <= VOLT_BAND
        in_loss_band += loss_ok
        in_volt_band += volt_ok
        marks = f"{'L' if loss_ok else '-'}{'V' if volt_ok else '-'}"
        print(f"{name:<13} {loss:>9.3f} {ref['loss_kwh']:>9.3f} {loss_dev:>+6.1%}   "
              f"{minv:>8.4f} {ref['overall']:>7.4f} {volt_dev:>+7.4f}  {marks}")

    losses = {s: r.total_loss_kwh for s, r in reports.items()}
    order = sorted(losses, key=losses.get, reverse=True)
    ref_order = sorted(REFERENCE, key=lambda s: REFERENCE[s]["loss_kwh"], reverse=True)
    print(f"\nloss ordering: {' > '.join(order)}")
    print(f"reference    : {' > '.join(ref_order)}  "
          f"({'match' if order == ref_order else 'MISMATCH'})")

    table = compare_scenarios({s: r.summary() for s, r in reports.items()},
                              baseline="uncontrolled")
    print("\nimprovements against uncontrolled charging (this simulation / reference):")
    ref_b = REFERENCE["uncontrolled"]["loss_kwh"]
    for name in ("timer", "zoned", "semismart"):
        ours = -table[name]["loss_change_pct"]
        ref = 100.0 * (ref_b - REFERENCE[name]["loss_kwh"]) / ref_b
        print(f"  {name:<10} losses -{ours:4.1f}%   reference -{ref:4.1f}%")

    print(f"\nwithin expectation bands: losses {in_loss_band}/5 "
          f"(±{LOSS_BAND:.0%}), minima {in_volt_band}/5 (±{VOLT_BAND} pu)")
    print("see the module docstring for why full agreement is not expected")
    return 0


if __name__ == "__main__":
    sys.exit(main())
