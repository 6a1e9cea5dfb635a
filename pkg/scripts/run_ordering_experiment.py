#!/usr/bin/env python3
"""Run the scheduler-ordering experiment and print the aggregate table.

Drives the packaged CLI against a config (default: the ordering experiment
shipped in configs/), then echoes the combined summary table it wrote.
"""

import argparse
import sys
from pathlib import Path

from ace_hpo.cli import load_config, main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--config",
        default=str(Path(__file__).resolve().parent.parent / "configs" / "ordering_experiment.json"),
        help="experiment config to run",
    )
    parser.add_argument("--output-dir", default=None, help="override the output directory")
    args = parser.parse_args()

    cli_args = ["run", args.config]
    if args.output_dir:
        cli_args += ["--output-dir", args.output_dir]
    code = cli_main(cli_args)
    if code != 0:
        return code

    config = load_config(args.config)
    out_dir = Path(args.output_dir or config.get("output_dir", "results"))
    summary = out_dir / "summary.txt"
    print()
    print(summary.read_text(encoding="utf-8"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
