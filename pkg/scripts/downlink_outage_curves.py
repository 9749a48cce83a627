#!/usr/bin/env python3
"""Downlink outage probabilities: FD-LE vs FD-DFE marked symbols.

Produces the outage curves for the high-mobility user (aggregate, first
symbol, and best-protected last symbol) plus the closed-form reference for
the last symbol, whose multipath diversity order is P0 + 1.
"""

import argparse

from otfsnoma import (
    CurvePoint,
    ScenarioConfig,
    corollary1_outage,
    diversity_slope,
    emit_csv,
    run_scenario,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20260809)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="downlink_outage_dfe.csv")
    args = ap.parse_args()

    snrs = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    cfg = ScenarioConfig(
        direction="downlink", n=16, m=16, k_users=16, gamma0_sq=0.75,
        rate_u0=0.5, rate_noma=1.0, equalizer="dfe", scheduler="random",
        snr_db=snrs, trials=args.trials, seed=args.seed)
    points = run_scenario(cfg, workers=args.workers)
    analytic = [CurvePoint(snr_db=s, metric="u0_outage_last_analytic",
                           value=corollary1_outage(3, 10 ** (s / 10), 0.75, 0.25, 0.5),
                           ci_halfwidth=0.0, trials_used=1)
                for s in snrs]
    emit_csv(points + analytic, args.out)
    print(f"wrote {args.out}")

    last = [p for p in points if p.metric == "u0_outage_last"]
    try:
        print(f"measured last-symbol slope: {diversity_slope(last):.2f} "
              "(multipath order is 4)")
    except Exception as exc:
        print(f"slope not estimable at these settings: {exc}")


if __name__ == "__main__":
    main()
