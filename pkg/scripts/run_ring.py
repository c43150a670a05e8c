#!/usr/bin/env python3
"""Ring-topology benchmark: ten links of ninety, single input, 20 dB."""

import argparse

from arxnet.harness import ExperimentConfig, cmd_montecarlo


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=303)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--out", default=None)
    parser.add_argument("--snr", type=float, default=20.0)
    parser.add_argument("--modes", default="gesbl,sbl,gsbl")
    args = parser.parse_args()
    config = ExperimentConfig(
        experiment="ring",
        runs=args.runs,
        master_seed=args.seed,
        p=10,
        t=65,
        snr_db=args.snr,
        k=8,
        solver="cccp",
        modes=tuple(args.modes.split(",")),
        max_outer=60,
    )
    report = cmd_montecarlo(config, args.out, jobs=args.jobs)
    print(report.format_table())


if __name__ == "__main__":
    main()
