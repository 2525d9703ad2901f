"""Scaled convergence experiment: train on the 10x10x5 one-box world and report greedy metrics.

Usage: python3 scripts/run_scaled_convergence.py [--seeds 0 1 2] [--episodes 3000] [--out runs/scaled]

For every seed this prints the greedy success rate over 100 rollouts, the
share of axis-aligned rollouts on the empty world within two turns of the
scripted path, and whether every score below -400 in the episode log is a
crash. Per-seed logs and checkpoints go under ``--out`` when given.
"""
import argparse
import json
import time
from pathlib import Path

from plantnav.evaluation import success_rate
from plantnav.scenarios import axis_aligned_pairs, empty_scaled_world, scaled_config, scaled_world, turn_excess
from plantnav.trainer import train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--episodes", type=int, default=3000)
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        cfg = scaled_config(seed, args.episodes)
        out = Path(args.out) / f"seed_{seed}" if args.out else None
        t0 = time.time()
        res = train(scaled_world(), cfg, out)
        rate = success_rate(scaled_world(), res.net, 100, 10_000 + seed, cfg)
        excess = turn_excess(empty_scaled_world(), res.net, cfg, axis_aligned_pairs(empty_scaled_world(), 50, seed))
        within = sum(e <= 2 for e in excess) / len(excess)
        attributed = all(r.termination.value == "crash" for r in res.episodes if r.score < -400)
        row = {"seed": seed, "success_rate": rate, "turns_within_2": within,
               "low_scores_are_crashes": attributed, "seconds": round(time.time() - t0, 1)}
        print(json.dumps(row), flush=True)
        rows.append(row)
    passed = sum(r["success_rate"] >= 0.9 for r in rows)
    print(f"{passed}/{len(rows)} seeds reached success_rate >= 0.9")


if __name__ == "__main__":
    main()
