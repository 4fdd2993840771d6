"""Reference 2048 game mechanics on a row-major 4x4 board.

Boards are plain tuples of 16 tile values (0 for an empty cell). Nothing here
is optimised; :mod:`evo2048.fastsim` carries the compiled twin used for
fitness evaluation, and the test suite keeps the two in lock step.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from evo2048.rng import RandomStream

SIZE = 4
CELLS = SIZE * SIZE
MAX_TILE = 1 << 17
MOVE_CAP = 10_000
FOUR_PROBABILITY = 0.1

Board = tuple  # tuple[int, ...] of length 16


class Direction(enum.IntEnum):
    """Move directions, numbered in clockwise order."""

    UP = 0
    RIGHT = 1
    DOWN = 2
    LEFT = 3

    def rotate(self, k: int = 1) -> "Direction":
        """Turn clockwise ``k`` quarter turns (UP -> RIGHT -> DOWN -> LEFT)."""
        return Direction((self + k) % 4)

    @classmethod
    def parse(cls, text: str) -> "Direction":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown direction {text!r}") from None


# fallback scan order when no rule fires
FALLBACK_ORDER = (Direction.UP, Direction.RIGHT, Direction.DOWN, Direction.LEFT)


def _lines(direction: Direction) -> tuple[tuple[int, ...], ...]:
    # each line lists cell indices starting at the edge tiles slide towards
    if direction is Direction.LEFT:
        return tuple(tuple(r * 4 + k for k in range(4)) for r in range(4))
    if direction is Direction.RIGHT:
        return tuple(tuple(r * 4 + 3 - k for k in range(4)) for r in range(4))
    if direction is Direction.UP:
        return tuple(tuple(k * 4 + c for k in range(4)) for c in range(4))
    return tuple(tuple((3 - k) * 4 + c for k in range(4)) for c in range(4))


LINES = {d: _lines(d) for d in Direction}


class InvalidBoard(ValueError):
    pass


def is_tile(v: int) -> bool:
    return v == 0 or (2 <= v <= MAX_TILE and v & (v - 1) == 0)


def make_board(values: Iterable[int]) -> Board:
    board = tuple(int(v) for v in values)
    if len(board) != CELLS:
        raise InvalidBoard(f"expected {CELLS} cells, got {len(board)}")
    bad = [v for v in board if not is_tile(v)]
    if bad:
        raise InvalidBoard(f"not a tile value: {bad[0]}")
    return board


def parse_board(text: str) -> Board:
    """Parse the 16-integer, space-separated trace form."""
    try:
        values = [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InvalidBoard(str(exc)) from None
    return make_board(values)


def format_board(board: Sequence[int]) -> str:
    return " ".join(str(v) for v in board)


def empty_board() -> Board:
    return (0,) * CELLS


def shift_merge_row(row: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Slide a line of tiles towards index 0, merging equal neighbours once.

    >>> shift_merge_row([2, 2, 4, 4])
    ((4, 8, 0, 0), 12)
    """
    out: list[int] = []
    gain = 0
    pending = 0
    for v in row:
        if v == 0:
            continue
        if v == pending:
            out[-1] = v * 2
            gain += v * 2
            pending = 0
        else:
            out.append(v)
            pending = v
    out.extend([0] * (len(row) - len(out)))
    return tuple(out), gain


@dataclass(frozen=True)
class MoveOutcome:
    board_after: Board
    score_gain: int
    changed: bool
    merges: int = 0


def apply_move(board: Board, direction: Direction) -> MoveOutcome:
    """Slide every line towards ``direction``; no tile is spawned."""
    cells = list(board)
    gain = 0
    merges = 0
    for line in LINES[direction]:
        row = [board[i] for i in line]
        new_row, g = shift_merge_row(row)
        gain += g
        merges += sum(1 for v in row if v) - sum(1 for v in new_row if v)
        for i, v in zip(line, new_row):
            cells[i] = v
    after = tuple(cells)
    assert max(after) <= MAX_TILE
    return MoveOutcome(after, gain, after != board, merges)


def legal_moves(board: Board) -> set[Direction]:
    return {d for d in Direction if apply_move(board, d).changed}


def is_game_over(board: Board) -> bool:
    return not legal_moves(board)


def empty_cells(board: Board) -> int:
    return sum(1 for v in board if v == 0)


def spawn_tile(board: Board, rng: RandomStream) -> Board:
    """Place a 2 (p=0.9) or 4 (p=0.1) on a uniformly chosen empty cell.

    Consumes exactly two doubles from ``rng``: one for the cell, one for the
    value.
    """
    free = [i for i, v in enumerate(board) if v == 0]
    if not free:
        raise RuntimeError("spawn_tile called on a full board")
    cell = free[int(rng.random() * len(free))]
    value = 4 if rng.random() < FOUR_PROBABILITY else 2
    cells = list(board)
    cells[cell] = value
    return tuple(cells)


def new_game(rng: RandomStream) -> Board:
    return spawn_tile(spawn_tile(empty_board(), rng), rng)


@dataclass(frozen=True)
class GameResult:
    total_score: int
    highest_tile: int
    moves: int
    seed: int

    @property
    def reached_2048(self) -> bool:
        return self.highest_tile >= 2048


def rotate_board(board: Board) -> Board:
    """Rotate the grid 90 degrees clockwise."""
    cells = [0] * CELLS
    for r in range(4):
        for c in range(4):
            cells[c * 4 + (3 - r)] = board[r * 4 + c]
    return tuple(cells)
