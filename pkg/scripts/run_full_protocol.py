"""Full replication protocol: calibrate all eight scenarios and emit tables.

Runs the complete grid (1152 combos at 100 trials each by default), so plan
for hours of wall time at full scale; use --trials to shrink it, --workers
to parallelize, and --resume to continue an interrupted run from the ledger.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lobfactor.cli import main as cli_main  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100, help="trials per combo")
    parser.add_argument("--scenarios", default="all", help="comma list of 0..7, or 'all'")
    parser.add_argument("--out", default="results/full", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel combo evaluations")
    parser.add_argument("--config", help="JSON config overriding the defaults")
    parser.add_argument("--resume", action="store_true", help="continue from the ledger")
    args = parser.parse_args()

    argv = ["experiment", "--scenarios", args.scenarios, "--trials", str(args.trials),
            "--out", args.out, "--workers", str(args.workers)]
    if args.config:
        argv += ["--config", args.config]
    if args.resume:
        argv.append("--resume")

    started = time.monotonic()
    rc = cli_main(argv)
    elapsed = time.monotonic() - started
    print(f"done in {elapsed / 60:.1f} min (exit {rc}); tables in {args.out}/")
    return rc


if __name__ == "__main__":
    sys.exit(main())
