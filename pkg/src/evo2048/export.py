"""Human-facing renderings of a policy.

* :func:`emit_pseudocode` -- readable ``if ...: move DIR`` listing
* :func:`emit_executable` -- standalone Python module exposing ``decide(board)``
* :func:`explain` -- per-rule account of how a move was chosen on one board
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from evo2048.engine import FALLBACK_ORDER, Board, Direction
from evo2048.policy import (
    AllOf,
    AnyOf,
    BoolQuery,
    Compare,
    Const,
    Not,
    Policy,
    QueryCall,
    QueryContext,
    eval_condition,
    eval_num,
    eval_query,
    fallback_move,
)


def _call_text(call: QueryCall, board_arg: Optional[str]) -> str:
    args = [d.name for d in call.args]
    if board_arg:
        args.insert(0, board_arg)
    return f"{call.name}({', '.join(args)})"


def _num_text(expr, board_arg):
    if isinstance(expr, Const):
        return str(expr.value)
    return _call_text(expr.call, board_arg)


def _joined(expr) -> bool:
    # single-child lists render as their child, so look through them
    while isinstance(expr, (AllOf, AnyOf)) and len(expr.children) == 1:
        expr = expr.children[0]
    return isinstance(expr, (AllOf, AnyOf))


def condition_text(expr, board_arg: Optional[str] = None) -> str:
    """Infix rendering; with ``board_arg`` the text is valid Python."""
    if isinstance(expr, BoolQuery):
        return _call_text(expr.call, board_arg)
    if isinstance(expr, Compare):
        return f"{_num_text(expr.lhs, board_arg)} {expr.op} {_num_text(expr.rhs, board_arg)}"
    if isinstance(expr, Not):
        inner = condition_text(expr.child, board_arg)
        if isinstance(expr.child, BoolQuery):
            return f"not {inner}"
        return f"not ({inner})"
    joiner = " and " if isinstance(expr, AllOf) else " or "
    if len(expr.children) == 1:
        return condition_text(expr.children[0], board_arg)
    parts = []
    for c in expr.children:
        text = condition_text(c, board_arg)
        if _joined(c):
            text = f"({text})"
        parts.append(text)
    return joiner.join(parts)


def emit_pseudocode(policy: Policy) -> str:
    lines = ["# rules are tried top to bottom; a rule fires only if its move is legal"]
    for i, rule in enumerate(policy.rules):
        lines.append(f"# rule {i}")
        lines.append(f"if {condition_text(rule.condition)}:")
        lines.append(f"    move {rule.action.name}")
    order = ", ".join(d.name for d in FALLBACK_ORDER)
    lines.append("# otherwise")
    lines.append(f"move first legal of {order}")
    return "\n".join(lines) + "\n"


_MODULE_HEADER = '''\
"""Exported 2048 policy.

decide(board) takes 16 tile values in row-major order (0 = empty) and
returns "UP", "DOWN", "LEFT" or "RIGHT". Rules are tried in order; a rule
fires when its condition holds and its move is legal. When no rule fires the
first legal move of UP, RIGHT, DOWN, LEFT is played.
"""

UP, RIGHT, DOWN, LEFT = "UP", "RIGHT", "DOWN", "LEFT"


def _line_cells(direction):
    # cell indices of each line, starting at the edge the tiles slide to
    if direction == LEFT:
        return [[4 * r + k for k in range(4)] for r in range(4)]
    if direction == RIGHT:
        return [[4 * r + 3 - k for k in range(4)] for r in range(4)]
    if direction == UP:
        return [[4 * k + c for k in range(4)] for c in range(4)]
    return [[4 * (3 - k) + c for k in range(4)] for c in range(4)]


def _slide(board, direction):
    """Return (new board, score gain, number of merges); no tile spawn."""
    new = list(board)
    gain = 0
    merges = 0
    for cells in _line_cells(direction):
        tiles = [board[i] for i in cells if board[i]]
        merged = []
        k = 0
        while k < len(tiles):
            if k + 1 < len(tiles) and tiles[k] == tiles[k + 1]:
                merged.append(2 * tiles[k])
                gain += 2 * tiles[k]
                merges += 1
                k += 2
            else:
                merged.append(tiles[k])
                k += 1
        merged += [0] * (4 - len(merged))
        for i, v in zip(cells, merged):
            new[i] = v
    return new, gain, merges


def canMoveInDirection(board, d):
    return _slide(board, d)[0] != list(board)


def canMoveInDirections(board, d1, d2):
    if not canMoveInDirection(board, d1):
        return False
    return canMoveInDirection(_slide(board, d1)[0], d2)


def scoreGain(board, d):
    return _slide(board, d)[1]


def scoreGains(board, d1, d2):
    if not canMoveInDirection(board, d1):
        return 0
    after, gain, _ = _slide(board, d1)
    return gain + _slide(after, d2)[1]


def willBeSorted(board, d):
    after = _slide(board, d)[0]
    snake = [0, 1, 2, 3, 7, 6, 5, 4, 8, 9, 10, 11, 15, 14, 13, 12]
    tiles = [after[i] for i in snake if after[i]]
    return all(a >= b for a, b in zip(tiles, tiles[1:]))


def emptyCellGain(board, d):
    if not canMoveInDirection(board, d):
        return 0
    return _slide(board, d)[0].count(0) - list(board).count(0)


def emptyCells(board):
    return list(board).count(0)


def maxTile(board):
    return max(board)


def maxTileInCorner(board):
    top = max(board)
    return top in (board[0], board[3], board[12], board[15])


def mergeCount(board, d):
    if not canMoveInDirection(board, d):
        return 0
    return _slide(board, d)[2]


def decide(board):
    board = list(board)
'''

_MODULE_FOOTER = '''\
    for d in (UP, RIGHT, DOWN, LEFT):
        if canMoveInDirection(board, d):
            return d
    raise ValueError("no legal move")
'''


def emit_executable(policy: Policy) -> str:
    body = []
    for i, rule in enumerate(policy.rules):
        cond = condition_text(rule.condition, "board")
        act = rule.action.name
        body.append(f"    # rule {i}")
        body.append(f"    if ({cond}) and canMoveInDirection(board, {act}):")
        body.append(f"        return {act}")
    return _MODULE_HEADER + "\n".join(body) + "\n" + _MODULE_FOOTER


# --------------------------------------------------------------------------
# explanations


@dataclass
class LeafValue:
    description: str
    operands: list
    result: bool


@dataclass
class RuleTrace:
    rule_index: int
    condition: str
    action: str
    evaluated: bool
    condition_value: Optional[bool] = None
    action_legal: Optional[bool] = None
    leaf_values: list[LeafValue] = field(default_factory=list)


@dataclass
class ExplanationTrace:
    board: list[int]
    rules: list[RuleTrace]
    fired: Optional[int]
    fallback_used: bool
    chosen: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _leaves(expr, ctx: QueryContext, out: list[LeafValue]):
    if isinstance(expr, (AllOf, AnyOf)):
        for c in expr.children:
            _leaves(c, ctx, out)
    elif isinstance(expr, Not):
        _leaves(expr.child, ctx, out)
    elif isinstance(expr, BoolQuery):
        v = bool(eval_query(expr.call, ctx.board, ctx))
        out.append(LeafValue(condition_text(expr), [v], v))
    else:
        lhs, rhs = eval_num(expr.lhs, ctx), eval_num(expr.rhs, ctx)
        out.append(LeafValue(condition_text(expr), [lhs, rhs],
                             eval_condition(expr, ctx.board, ctx)))


def explain(policy: Policy, board: Board, full: bool = False) -> ExplanationTrace:
    """Record every leaf value of each rule up to the one that fires.

    With ``full=True`` the rules after the firing rule are evaluated too (they
    cannot change the decision).
    """
    ctx = QueryContext(tuple(board))
    traces = []
    fired = None
    for i, rule in enumerate(policy.rules):
        tr = RuleTrace(i, condition_text(rule.condition), rule.action.name, evaluated=False)
        traces.append(tr)
        if fired is not None and not full:
            continue
        tr.evaluated = True
        _leaves(rule.condition, ctx, tr.leaf_values)
        tr.condition_value = eval_condition(rule.condition, ctx.board, ctx)
        tr.action_legal = ctx.move(rule.action).changed
        if fired is None and tr.condition_value and tr.action_legal:
            fired = i
    chosen: Direction = policy.rules[fired].action if fired is not None else fallback_move(ctx)
    return ExplanationTrace(list(board), traces, fired, fired is None, chosen.name)


def explanation_text(trace: ExplanationTrace) -> str:
    lines = [f"board: {' '.join(str(v) for v in trace.board)}"]
    for tr in trace.rules:
        lines.append(f"rule {tr.rule_index}: if {tr.condition} -> {tr.action}")
        if not tr.evaluated:
            lines.append("    (not evaluated)")
            continue
        for leaf in tr.leaf_values:
            ops = ", ".join(str(o).lower() if isinstance(o, bool) else str(o) for o in leaf.operands)
            lines.append(f"    {leaf.description}  [{ops}] -> {str(leaf.result).lower()}")
        verdict = "fires" if trace.fired == tr.rule_index else "does not fire"
        legal = "legal" if tr.action_legal else "illegal"
        lines.append(f"    condition {str(tr.condition_value).lower()}, {tr.action} {legal}: {verdict}")
    if trace.fallback_used:
        lines.append(f"no rule fired; fallback picks first legal move: {trace.chosen}")
    else:
        lines.append(f"chosen: {trace.chosen} (rule {trace.fired})")
    return "\n".join(lines) + "\n"
