#!/usr/bin/env python3
"""Multi-user diversity: random vs greedy scheduling of the NOMA users.

Greedy max-min selection concentrates all subchannels on the strongest user
and lifts the NOMA sum rate at low and moderate SNR.
"""

import argparse

from otfsnoma import ScenarioConfig, emit_csv, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-users", type=int, nargs="+", default=[4, 16])
    ap.add_argument("--trials", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=20260809)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out-prefix", default="scheduling_sum_rate")
    args = ap.parse_args()

    for scheduler in ("random", "greedy"):
        for k in args.k_users:
            if scheduler == "random" and k < 16:
                continue  # random selection needs K >= M subchannels
            cfg = ScenarioConfig(
                direction="downlink", n=16, m=16, k_users=k, gamma0_sq=0.75,
                rate_u0=1.0, rate_noma=1.5, equalizer="le", scheduler=scheduler,
                snr_db=tuple(range(0, 41, 5)), trials=args.trials, seed=args.seed)
            points = run_scenario(cfg, workers=args.workers)
            path = f"{args.out_prefix}_{scheduler}_k{k}.csv"
            emit_csv(points, path)
            mid = {p.snr_db: p.value for p in points if p.metric == "outage_sum_rate_noma"}
            print(f"{scheduler} K={k}: wrote {path}; NOMA sum rate at 20 dB = {mid[20.0]:.3f}")


if __name__ == "__main__":
    main()
