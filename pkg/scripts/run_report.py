#!/usr/bin/env python3
"""Run the full synthetic study end to end and print the headline numbers.

Usage: python scripts/run_report.py [out_dir] [--seed N] [--records N]
"""

import argparse
import sys

from stackrec import harness


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", nargs="?", default="report")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--records", type=int, default=500)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args()

    config = harness.ReportConfig(
        out_dir=args.out_dir, seed=args.seed, records=args.records,
        alpha=args.alpha, parallel=args.parallel,
    )
    try:
        summary = harness.run_report(config)
    except harness.ReportError as exc:
        print(f"failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return 1

    fit = summary["power_law"]
    print(f"requests replayed : {summary['requests']}")
    print(f"heat-map mass     : {summary['heatmap_mass']}")
    print(f"power-law fit     : exponent {fit['exponent']:.3f}, R^2 {fit['r_squared']:.3f}")
    print("top subjects:")
    for name, count in summary["subject_distribution"][:5]:
        print(f"  {count:6d}  {name}")
    print(f"artifacts in {config.out_dir}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
