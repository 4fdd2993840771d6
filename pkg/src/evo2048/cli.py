"""Command-line front end: ``evo2048 {evolve,play,explain,stats,export}``.

Exit codes: 0 ok, 2 usage or configuration error, 3 domain error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from evo2048 import engine, export, policy as pol
from evo2048.evolve import ConfigError, EvoConfig, history_csv, history_from_protocol, run_evolution
from evo2048.fitness import play_game, read_protocol, stats_from_games
from evo2048.rng import derive_seed

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3

ARTIFACTS = ("best_policy.json", "best_policy.txt", "best_policy.py", "history.csv", "protocol.jsonl")


class UsageError(Exception):
    pass


def _load_policy(path) -> pol.Policy:
    try:
        return pol.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read policy: {exc}") from None
    except (ValueError, pol.InvalidPolicy) as exc:
        raise UsageError(f"invalid policy file {path}: {exc}") from None


def _load_config(path, seed=None) -> EvoConfig:
    cfg = EvoConfig.from_file(path) if path else EvoConfig()
    if seed is not None:
        cfg = EvoConfig(**{**cfg.__dict__, "seed": seed})
    return cfg


def cmd_evolve(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(rec):
        if not args.quiet:
            print(f"gen {rec.generation:4d}  best max {rec.best_max_tile:5d}  "
                  f"best avg {rec.best_avg_tile:8.1f}  best score {rec.best_avg_score:9.1f}",
                  file=sys.stderr)

    with open(out / "protocol.jsonl", "w") as proto:
        result = run_evolution(cfg, protocol=proto, on_generation=progress)
    best = result.best.policy
    pol.save(best, out / "best_policy.json")
    (out / "best_policy.txt").write_text(export.emit_pseudocode(best))
    (out / "best_policy.py").write_text(export.emit_executable(best))
    (out / "history.csv").write_text(history_csv(result.history))
    f = result.best.fitness
    print(f"{result.generations} generations, {result.evaluations} games")
    print(f"best: max tile {f.max_highest_tile}, avg tile {f.avg_highest_tile}, "
          f"avg score {f.avg_total_score}")
    return EXIT_OK


def cmd_play(args) -> int:
    policy = _load_policy(args.policy)
    if args.games < 1:
        raise UsageError("--games must be at least 1")
    trace = open(args.trace, "w") if args.trace else None

    def record(board, chosen):
        trace.write(json.dumps({"board": list(board), "chosen": chosen.name}) + "\n")

    results = []
    try:
        for i in range(args.games):
            seed = derive_seed(args.seed, i)
            res = play_game(policy, seed, on_move=record if trace else None)
            results.append(res)
            print(f"game {i} seed {seed} score {res.total_score} max_tile {res.highest_tile} "
                  f"moves {res.moves}")
    finally:
        if trace:
            trace.close()
    print(json.dumps(stats_from_games(results).to_dict()))
    return EXIT_OK


def cmd_explain(args) -> int:
    policy = _load_policy(args.policy)
    try:
        board = engine.parse_board(args.board)
    except engine.InvalidBoard as exc:
        raise UsageError(f"invalid board: {exc}") from None
    if engine.is_game_over(board):
        print("error: no legal move on this board", file=sys.stderr)
        return EXIT_DOMAIN
    trace = export.explain(policy, board, full=args.full)
    sys.stdout.write(export.explanation_text(trace))
    print(trace.to_json())
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        records = read_protocol(args.protocol)
    except OSError as exc:
        raise UsageError(f"cannot read protocol: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not records:
        raise UsageError("protocol is empty")
    cfg = _load_config(args.config)
    history = history_from_protocol(records, cfg.objective_priority, cfg.comparator_mode)
    sys.stdout.write(history_csv(history))
    return EXIT_OK


def cmd_export(args) -> int:
    policy = _load_policy(args.policy)
    if args.format == "pseudocode":
        sys.stdout.write(export.emit_pseudocode(policy))
    else:
        sys.stdout.write(export.emit_executable(policy))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evo2048", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evolve", help="run the evolutionary search")
    e.add_argument("--config", help="flat key = value config file (defaults if omitted)")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--seed", type=int, help="override the config seed")
    e.add_argument("--quiet", action="store_true", help="no per-generation progress")
    e.set_defaults(func=cmd_evolve)

    pl = sub.add_parser("play", help="play games with a policy")
    pl.add_argument("policy")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--games", type=int, default=1)
    pl.add_argument("--trace", help="write a JSON-lines decision trace here")
    pl.set_defaults(func=cmd_play)

    ex = sub.add_parser("explain", help="explain the move chosen on a board")
    ex.add_argument("policy")
    ex.add_argument("--board", required=True, help='16 tile values, e.g. "2 2 0 0 ..."')
    ex.add_argument("--full", action="store_true", help="evaluate rules after the firing one too")
    ex.set_defaults(func=cmd_explain)

    st = sub.add_parser("stats", help="rebuild the per-generation CSV from a protocol")
    st.add_argument("protocol")
    st.add_argument("--config", help="config used for the run (comparator settings)")
    st.set_defaults(func=cmd_stats)

    xp = sub.add_parser("export", help="print a policy as pseudocode or Python")
    xp.add_argument("policy")
    xp.add_argument("--format", choices=("pseudocode", "python"), default="pseudocode")
    xp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
