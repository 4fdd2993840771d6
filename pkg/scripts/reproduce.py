#!/usr/bin/env python
"""Full-budget reproduction: default settings (population 100, 6 games per
evaluation, 200,000 games) for several seeds.

Writes, per seed, the same artifacts as ``evo2048 evolve`` under
``<out>/seed_<n>/`` and prints a summary table. Single core: ~10-14 min per seed.

    python scripts/reproduce.py --seeds 0 1 2 --out runs/full
"""
import argparse
import json
import time
from pathlib import Path

from evo2048 import export, policy
from evo2048.evolve import EvoConfig, history_csv, run_evolution


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--out", default="runs/full")
    ap.add_argument("--population", type=int, default=100)
    ap.add_argument("--games", type=int, default=6)
    ap.add_argument("--budget", type=int, default=200_000)
    args = ap.parse_args()

    summary = []
    for seed in args.seeds:
        cfg = EvoConfig(population_size=args.population, games_per_eval=args.games,
                        evaluation_budget=args.budget, seed=seed)
        out = Path(args.out) / f"seed_{seed}"
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
        t0 = time.time()
        with open(out / "protocol.jsonl", "w") as proto:
            res = run_evolution(cfg, protocol=proto)
        elapsed = time.time() - t0
        best = res.best.policy
        policy.save(best, out / "best_policy.json")
        (out / "best_policy.txt").write_text(export.emit_pseudocode(best))
        (out / "best_policy.py").write_text(export.emit_executable(best))
        (out / "history.csv").write_text(history_csv(res.history))
        f = res.best.fitness
        row = {
            "seed": seed,
            "generations": res.generations,
            "games": res.evaluations,
            "max_highest_tile": f.max_highest_tile,
            "avg_highest_tile": f.avg_highest_tile,
            "avg_total_score": f.avg_total_score,
            "seconds": round(elapsed, 1),
        }
        summary.append(row)
        print(json.dumps(row), flush=True)
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
