"""Playing games with a policy, fitness statistics and protocol logs."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import IO, Callable, Iterable, Optional, Sequence

from evo2048 import engine
from evo2048.engine import MOVE_CAP, Board, Direction, GameResult
from evo2048.policy import Policy, decide
from evo2048.rng import RandomStream

OBJECTIVES = (
    "min_highest_tile",
    "max_highest_tile",
    "avg_highest_tile",
    "min_total_score",
    "max_total_score",
    "avg_total_score",
)


def play_game(
    policy: Policy,
    seed: int,
    move_cap: int = MOVE_CAP,
    on_move: Optional[Callable[[Board, Direction], None]] = None,
) -> GameResult:
    """Play one game with the reference interpreter.

    ``on_move(board, chosen)`` is called before each move is applied, which
    is how decision traces are recorded.
    """
    rng = RandomStream(seed)
    board = engine.new_game(rng)
    score = 0
    moves = 0
    while moves < move_cap and not engine.is_game_over(board):
        chosen, _ = decide(policy, board)
        if on_move is not None:
            on_move(board, chosen)
        outcome = engine.apply_move(board, chosen)
        score += outcome.score_gain
        moves += 1
        board = engine.spawn_tile(outcome.board_after, rng)
    return GameResult(total_score=score, highest_tile=max(board), moves=moves, seed=seed)


@dataclass(frozen=True)
class FitnessStats:
    min_highest_tile: int
    max_highest_tile: int
    avg_highest_tile: float
    min_total_score: int
    max_total_score: int
    avg_total_score: float
    games: int

    def value(self, objective: str):
        if objective not in OBJECTIVES:
            raise KeyError(f"unknown objective {objective!r}")
        return getattr(self, objective)

    def to_dict(self) -> dict:
        return asdict(self)


def stats_from_games(games: Sequence[GameResult]) -> FitnessStats:
    if not games:
        raise ValueError("need at least one game")
    tiles = [g.highest_tile for g in games]
    scores = [g.total_score for g in games]
    return FitnessStats(
        min_highest_tile=min(tiles),
        max_highest_tile=max(tiles),
        avg_highest_tile=sum(tiles) / len(tiles),
        min_total_score=min(scores),
        max_total_score=max(scores),
        avg_total_score=sum(scores) / len(scores),
        games=len(games),
    )


def play_games(policy: Policy, seeds: Iterable[int], backend: str = "compiled") -> list[GameResult]:
    seeds = list(seeds)
    if backend == "compiled":
        from evo2048.fastsim import simulate

        return simulate(policy, seeds)
    if backend == "reference":
        return [play_game(policy, s) for s in seeds]
    raise ValueError(f"unknown backend {backend!r}")


def evaluate(policy: Policy, seeds: Sequence[int], backend: str = "compiled") -> FitnessStats:
    return stats_from_games(play_games(policy, seeds, backend))


# --------------------------------------------------------------------------
# protocol log (JSON lines, one record per evaluation)


def protocol_record(generation: int, individual: int, games: Sequence[GameResult],
                    cached: bool = False) -> dict:
    stats = stats_from_games(games)
    rec = {
        "gen": generation,
        "ind": individual,
        "games": [
            {"seed": g.seed, "score": g.total_score, "max_tile": g.highest_tile, "moves": g.moves}
            for g in games
        ],
        "stats": stats.to_dict(),
    }
    if cached:
        rec["cached"] = True
    return rec


def write_protocol(fh: IO[str], generation: int, individual: int,
                   games: Sequence[GameResult], cached: bool = False) -> dict:
    """Append one evaluation record to an open protocol file."""
    rec = protocol_record(generation, individual, games, cached)
    fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return rec


def games_from_record(rec: dict) -> list[GameResult]:
    return [
        GameResult(total_score=g["score"], highest_tile=g["max_tile"], moves=g["moves"], seed=g["seed"])
        for g in rec["games"]
    ]


def read_protocol(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records
