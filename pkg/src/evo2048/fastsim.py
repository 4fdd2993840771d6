"""Compiled game simulation for fitness evaluation.

A policy is flattened into a fixed-width postfix program (four int64 words per
instruction) and interpreted inside a numba kernel together with the game
loop. Boards are stored as tile exponents. The kernel reproduces
:func:`evo2048.fitness.play_game` exactly, SplitMix64 draws included.
"""
from __future__ import annotations

from typing import Sequence

import numba as nb
import numpy as np

from evo2048.engine import MOVE_CAP, Direction, GameResult
from evo2048.policy import (
    COMPARE_OPS,
    QUERY_IDS,
    AllOf,
    AnyOf,
    BoolQuery,
    Compare,
    Const,
    Not,
    NumQuery,
    Policy,
)

OP_CONST, OP_QUERY, OP_CMP, OP_NOT, OP_ALL, OP_ANY = range(6)
CMP_CODES = {op: i for i, op in enumerate(COMPARE_OPS)}  # < <= > >= ==


def _line_table() -> np.ndarray:
    table = np.zeros((4, 4, 4), dtype=np.int64)
    for r in range(4):
        for k in range(4):
            table[Direction.UP, r, k] = k * 4 + r
            table[Direction.RIGHT, r, k] = r * 4 + 3 - k
            table[Direction.DOWN, r, k] = (3 - k) * 4 + r
            table[Direction.LEFT, r, k] = r * 4 + k
    return table


LINES = _line_table()
SNAKE = np.array([0, 1, 2, 3, 7, 6, 5, 4, 8, 9, 10, 11, 15, 14, 13, 12], dtype=np.int64)
FALLBACK = np.array([Direction.UP, Direction.RIGHT, Direction.DOWN, Direction.LEFT], dtype=np.int64)


class CompiledPolicy:
    """Flat arrays handed to the kernel."""

    def __init__(self, code: np.ndarray, starts: np.ndarray, lengths: np.ndarray, actions: np.ndarray):
        self.code = code
        self.starts = starts
        self.lengths = lengths
        self.actions = actions


def _emit_num(expr, out):
    if isinstance(expr, Const):
        out.append((OP_CONST, expr.value, 0, 0))
    else:
        _emit_call(expr.call, out)


def _emit_call(call, out):
    args = [int(a) for a in call.args] + [0, 0]
    out.append((OP_QUERY, QUERY_IDS[call.name], args[0], args[1]))


def _emit_bool(expr, out):
    if isinstance(expr, (AllOf, AnyOf)):
        for c in expr.children:
            _emit_bool(c, out)
        out.append((OP_ALL if isinstance(expr, AllOf) else OP_ANY, len(expr.children), 0, 0))
    elif isinstance(expr, Not):
        _emit_bool(expr.child, out)
        out.append((OP_NOT, 0, 0, 0))
    elif isinstance(expr, BoolQuery):
        _emit_call(expr.call, out)
    elif isinstance(expr, Compare):
        _emit_num(expr.lhs, out)
        _emit_num(expr.rhs, out)
        out.append((OP_CMP, CMP_CODES[expr.op], 0, 0))
    else:  # pragma: no cover - validated upstream
        raise TypeError(expr)


def compile_policy(policy: Policy) -> CompiledPolicy:
    instrs: list[tuple[int, int, int, int]] = []
    starts, lengths, actions = [], [], []
    for rule in policy.rules:
        starts.append(len(instrs))
        _emit_bool(rule.condition, instrs)
        lengths.append(len(instrs) - starts[-1])
        actions.append(int(rule.action))
    return CompiledPolicy(
        np.array(instrs, dtype=np.int64).reshape(-1, 4),
        np.array(starts, dtype=np.int64),
        np.array(lengths, dtype=np.int64),
        np.array(actions, dtype=np.int64),
    )


# --------------------------------------------------------------------------
# kernels

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_UNIT = 1.0 / 9007199254740992.0


@nb.njit(cache=True)
def _next_double(state):
    s = state[0] + _GAMMA
    state[0] = s
    z = s
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * _UNIT


@nb.njit(cache=True)
def _spawn(board, state):
    n = 0
    for i in range(16):
        if board[i] == 0:
            n += 1
    pick = int(_next_double(state) * n)
    exp = 2 if _next_double(state) < 0.1 else 1
    for i in range(16):
        if board[i] == 0:
            if pick == 0:
                board[i] = exp
                return
            pick -= 1


@nb.njit(cache=True)
def _move(board, d, out):
    """Write the slid board into ``out``; return (gain, merges, changed)."""
    gain = 0
    merges = 0
    changed = False
    for ln in range(4):
        pos = 0
        last = 0
        for k in range(4):
            out[LINES[d, ln, k]] = 0
        for k in range(4):
            v = board[LINES[d, ln, k]]
            if v == 0:
                continue
            if v == last:
                out[LINES[d, ln, pos - 1]] = v + 1
                gain += 1 << (v + 1)
                merges += 1
                last = 0
            else:
                out[LINES[d, ln, pos]] = v
                last = v
                pos += 1
        for k in range(4):
            if out[LINES[d, ln, k]] != board[LINES[d, ln, k]]:
                changed = True
    return gain, merges, changed


@nb.njit(cache=True)
def _ensure_first(board, d, done, after, gains, merges, changed):
    if not done[d]:
        g, m, c = _move(board, d, after[d])
        gains[d] = g
        merges[d] = m
        changed[d] = c
        done[d] = True


@nb.njit(cache=True)
def _query(qid, a1, a2, board, done, after, gains, merges, changed, done2, gains2, changed2, scratch):
    if qid == 0:  # canMoveInDirection
        _ensure_first(board, a1, done, after, gains, merges, changed)
        return 1 if changed[a1] else 0
    if qid == 1 or qid == 3:  # canMoveInDirections / scoreGains
        _ensure_first(board, a1, done, after, gains, merges, changed)
        if not changed[a1]:
            return 0
        if not done2[a1, a2]:
            g, m, c = _move(after[a1], a2, scratch)
            gains2[a1, a2] = g
            changed2[a1, a2] = c
            done2[a1, a2] = True
        if qid == 1:
            return 1 if changed2[a1, a2] else 0
        return gains[a1] + gains2[a1, a2]
    if qid == 2:  # scoreGain
        _ensure_first(board, a1, done, after, gains, merges, changed)
        return gains[a1]
    if qid == 4:  # willBeSorted
        _ensure_first(board, a1, done, after, gains, merges, changed)
        prev = 1 << 30
        for i in range(16):
            v = after[a1, SNAKE[i]]
            if v == 0:
                continue
            if v > prev:
                return 0
            prev = v
        return 1
    if qid == 5 or qid == 9:  # emptyCellGain / mergeCount; equal without spawn
        _ensure_first(board, a1, done, after, gains, merges, changed)
        if not changed[a1]:
            return 0
        return merges[a1]
    if qid == 6:  # emptyCells
        n = 0
        for i in range(16):
            if board[i] == 0:
                n += 1
        return n
    top = 0
    for i in range(16):
        if board[i] > top:
            top = board[i]
    if qid == 7:  # maxTile
        return 0 if top == 0 else 1 << top
    # maxTileInCorner
    if board[0] == top or board[3] == top or board[12] == top or board[15] == top:
        return 1
    return 0


@nb.njit(cache=True)
def _run_rule(code, start, length, board, done, after, gains, merges, changed, done2, gains2, changed2, scratch, stack):
    sp = 0
    for pc in range(start, start + length):
        op = code[pc, 0]
        if op == 0:
            stack[sp] = code[pc, 1]
            sp += 1
        elif op == 1:
            stack[sp] = _query(code[pc, 1], code[pc, 2], code[pc, 3], board, done, after, gains,
                               merges, changed, done2, gains2, changed2, scratch)
            sp += 1
        elif op == 2:
            rhs = stack[sp - 1]
            lhs = stack[sp - 2]
            sp -= 2
            c = code[pc, 1]
            if c == 0:
                r = lhs < rhs
            elif c == 1:
                r = lhs <= rhs
            elif c == 2:
                r = lhs > rhs
            elif c == 3:
                r = lhs >= rhs
            else:
                r = lhs == rhs
            stack[sp] = 1 if r else 0
            sp += 1
        elif op == 3:
            stack[sp - 1] = 1 - stack[sp - 1]
        else:
            n = code[pc, 1]
            acc = 1 if op == 4 else 0
            for j in range(sp - n, sp):
                if op == 4:
                    acc = acc & stack[j]
                else:
                    acc = acc | stack[j]
            sp -= n
            stack[sp] = acc
            sp += 1
    return stack[0] != 0


@nb.njit(cache=True)
def _play(code, starts, lengths, actions, seed, move_cap):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    board = np.zeros(16, dtype=np.int64)
    _spawn(board, state)
    _spawn(board, state)
    after = np.zeros((4, 16), dtype=np.int64)
    gains = np.zeros(4, dtype=np.int64)
    merges = np.zeros(4, dtype=np.int64)
    changed = np.zeros(4, dtype=np.bool_)
    done = np.zeros(4, dtype=np.bool_)
    gains2 = np.zeros((4, 4), dtype=np.int64)
    changed2 = np.zeros((4, 4), dtype=np.bool_)
    done2 = np.zeros((4, 4), dtype=np.bool_)
    scratch = np.zeros(16, dtype=np.int64)
    stack = np.zeros(64, dtype=np.int64)
    score = 0
    moves = 0
    while moves < move_cap:
        done[:] = False
        done2[:, :] = False
        any_legal = False
        for d in range(4):
            _ensure_first(board, d, done, after, gains, merges, changed)
            if changed[d]:
                any_legal = True
        if not any_legal:
            break
        chosen = -1
        for r in range(starts.shape[0]):
            if _run_rule(code, starts[r], lengths[r], board, done, after, gains, merges, changed,
                         done2, gains2, changed2, scratch, stack):
                if changed[actions[r]]:
                    chosen = actions[r]
                    break
        if chosen < 0:
            for d in FALLBACK:
                if changed[d]:
                    chosen = d
                    break
        score += gains[chosen]
        board[:] = after[chosen]
        moves += 1
        _spawn(board, state)
    top = 0
    for i in range(16):
        if board[i] > top:
            top = board[i]
    return score, 1 << top, moves


@nb.njit(cache=True)
def _play_many(code, starts, lengths, actions, seeds, move_cap, out):
    for g in range(seeds.shape[0]):
        s, t, m = _play(code, starts, lengths, actions, seeds[g], move_cap)
        out[g, 0] = s
        out[g, 1] = t
        out[g, 2] = m


def simulate(policy: Policy, seeds: Sequence[int], move_cap: int = MOVE_CAP) -> list[GameResult]:
    """Play one game per seed and return the results in seed order."""
    prog = compile_policy(policy)
    seed_arr = np.array([s & ((1 << 64) - 1) for s in seeds], dtype=np.uint64)
    out = np.zeros((len(seed_arr), 3), dtype=np.int64)
    _play_many(prog.code, prog.starts, prog.lengths, prog.actions, seed_arr, move_cap, out)
    return [
        GameResult(total_score=int(s), highest_tile=int(t), moves=int(m), seed=int(seed))
        for (s, t, m), seed in zip(out.tolist(), seeds)
    ]
