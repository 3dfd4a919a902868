#!/usr/bin/env python3
"""Sweep the cost simulator across tail shapes and quality gates.

Prints one table row per (zipf exponent, quality pass probability) cell:
backend calls made, the N*K worst-case bound, cache hit rate, and how
much of the stream the top 40 answer categories covered. Low exponents
flatten the tail (more distinct answers drawn, more backend calls);
low pass probabilities force re-analysis of quality-rejected keys.
"""

from __future__ import annotations

import argparse
import time

from vate.simulate import SimConfig, run_cost_sim


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--problems", type=int, default=10)
    parser.add_argument("--distinct", type=int, default=30,
                        help="distinct wrong-answer categories per problem")
    parser.add_argument("--submissions", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--exponents", type=float, nargs="+",
                        default=[0.8, 1.1, 1.5, 2.0])
    parser.add_argument("--pass-probs", type=float, nargs="+",
                        default=[1.0, 0.8, 0.5])
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    bound = args.problems * args.distinct
    print(
        f"{args.submissions} submissions over {args.problems} problems,"
        f" {args.distinct} categories each (N*K bound {bound})"
    )
    header = f"{'s':>5} {'pass':>5} {'calls':>7} {'hit_rate':>9} {'top40':>7} {'secs':>6}"
    print(header)
    print("-" * len(header))
    for exponent in args.exponents:
        for pass_prob in args.pass_probs:
            config = SimConfig(
                n_problems=args.problems,
                distinct_answers_per_problem=args.distinct,
                zipf_exponent=exponent,
                n_submissions=args.submissions,
                quality_pass_prob=pass_prob,
                seed=args.seed,
            )
            started = time.monotonic()
            report = run_cost_sim(config)
            elapsed = time.monotonic() - started
            print(
                f"{exponent:>5.2f} {pass_prob:>5.2f} {report.backend_calls:>7}"
                f" {report.hit_rate:>9.4f} {report.top40_coverage:>7.4f}"
                f" {elapsed:>6.1f}"
            )


if __name__ == "__main__":
    main()
