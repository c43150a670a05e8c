#!/usr/bin/env python3
"""Random sparse ARX networks across SNR levels, paired prior modes."""

import argparse

from arxnet.harness import ExperimentConfig, cmd_montecarlo


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=301)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--out", default=None)
    parser.add_argument("--snr", type=float, nargs="*", default=[30.0, 10.0])
    parser.add_argument("--modes", default="gesbl,sbl,gsbl")
    args = parser.parse_args()
    for snr in args.snr:
        config = ExperimentConfig(
            experiment="random-arx",
            runs=args.runs,
            master_seed=args.seed,
            p=10,
            m=10,
            edge_prob=0.4,
            t=100,
            snr_db=snr,
            k=8,
            solver="cccp",
            modes=tuple(args.modes.split(",")),
            warmup_em=True,
            max_outer=60,
        )
        out = None if args.out is None else f"{args.out}/snr_{snr:g}"
        report = cmd_montecarlo(config, out, jobs=args.jobs)
        print(f"\nSNR {snr:g} dB:")
        print(report.format_table())


if __name__ == "__main__":
    main()
