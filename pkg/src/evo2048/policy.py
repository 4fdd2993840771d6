"""Rule-based policy model: AST, board queries, interpreter and JSON form.

A policy is an ordered list of rules ``if <condition> then <direction>``.
Conditions are small boolean trees whose leaves query the board. The first
rule whose condition holds *and* whose move is legal decides the move; if no
rule fires the first legal direction in ``FALLBACK_ORDER`` is played.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional, Union

from evo2048.engine import (
    FALLBACK_ORDER,
    Board,
    Direction,
    MoveOutcome,
    apply_move,
    empty_cells,
)

MAX_RULES = 12
MAX_DEPTH = 4
MAX_CHILDREN = 4
CONST_MIN = 0
CONST_MAX = 4096

COMPARE_OPS: dict[str, Callable[[int, int], bool]] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}


# --------------------------------------------------------------------------
# Board queries


class QueryContext:
    """Memoises move outcomes for one board while a decision is evaluated."""

    def __init__(self, board: Board):
        self.board = board
        self._moves: dict[Direction, MoveOutcome] = {}
        self._pairs: dict[tuple[Direction, Direction], MoveOutcome] = {}

    def move(self, d: Direction) -> MoveOutcome:
        out = self._moves.get(d)
        if out is None:
            out = self._moves[d] = apply_move(self.board, d)
        return out

    def second_move(self, d1: Direction, d2: Direction) -> MoveOutcome:
        out = self._pairs.get((d1, d2))
        if out is None:
            out = self._pairs[d1, d2] = apply_move(self.move(d1).board_after, d2)
        return out


SNAKE_PATH = (0, 1, 2, 3, 7, 6, 5, 4, 8, 9, 10, 11, 15, 14, 13, 12)
CORNERS = (0, 3, 12, 15)


def _can_move(ctx, d):
    return ctx.move(d).changed


def _can_move_twice(ctx, d1, d2):
    return ctx.move(d1).changed and ctx.second_move(d1, d2).changed


def _score_gain(ctx, d):
    return ctx.move(d).score_gain


def _score_gains(ctx, d1, d2):
    first = ctx.move(d1)
    if not first.changed:
        return 0
    return first.score_gain + ctx.second_move(d1, d2).score_gain


def _will_be_sorted(ctx, d):
    after = ctx.move(d).board_after
    tiles = [after[i] for i in SNAKE_PATH if after[i]]
    return all(a >= b for a, b in zip(tiles, tiles[1:]))


def _empty_cell_gain(ctx, d):
    out = ctx.move(d)
    if not out.changed:
        return 0
    return empty_cells(out.board_after) - empty_cells(ctx.board)


def _empty_cells(ctx):
    return empty_cells(ctx.board)


def _max_tile(ctx):
    return max(ctx.board)


def _max_tile_in_corner(ctx):
    top = max(ctx.board)
    return any(ctx.board[i] == top for i in CORNERS)


def _merge_count(ctx, d):
    return ctx.move(d).merges


@dataclass(frozen=True)
class QuerySpec:
    name: str
    arity: int
    returns: str  # "bool" or "num"
    fn: Callable


# order fixes the numeric query ids used by the compiled simulator
QUERY_SPECS: tuple[QuerySpec, ...] = (
    QuerySpec("canMoveInDirection", 1, "bool", _can_move),
    QuerySpec("canMoveInDirections", 2, "bool", _can_move_twice),
    QuerySpec("scoreGain", 1, "num", _score_gain),
    QuerySpec("scoreGains", 2, "num", _score_gains),
    QuerySpec("willBeSorted", 1, "bool", _will_be_sorted),
    QuerySpec("emptyCellGain", 1, "num", _empty_cell_gain),
    QuerySpec("emptyCells", 0, "num", _empty_cells),
    QuerySpec("maxTile", 0, "num", _max_tile),
    QuerySpec("maxTileInCorner", 0, "bool", _max_tile_in_corner),
    QuerySpec("mergeCount", 1, "num", _merge_count),
)
QUERIES = {q.name: q for q in QUERY_SPECS}
QUERY_IDS = {q.name: i for i, q in enumerate(QUERY_SPECS)}
BOOL_QUERIES = tuple(q.name for q in QUERY_SPECS if q.returns == "bool")
NUM_QUERIES = tuple(q.name for q in QUERY_SPECS if q.returns == "num")


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class QueryCall:
    name: str
    args: tuple[Direction, ...] = ()

    def __post_init__(self):
        spec = QUERIES.get(self.name)
        if spec is None:
            raise ValueError(f"unknown query {self.name!r}")
        if len(self.args) != spec.arity:
            raise ValueError(f"{self.name} takes {spec.arity} direction argument(s)")

    @property
    def returns(self) -> str:
        return QUERIES[self.name].returns


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class NumQuery:
    call: QueryCall


@dataclass(frozen=True)
class BoolQuery:
    call: QueryCall


@dataclass(frozen=True)
class Compare:
    lhs: "NumExpr"
    op: str
    rhs: "NumExpr"


@dataclass(frozen=True)
class AllOf:
    children: tuple["BoolExpr", ...]


@dataclass(frozen=True)
class AnyOf:
    children: tuple["BoolExpr", ...]


@dataclass(frozen=True)
class Not:
    child: "BoolExpr"


NumExpr = Union[NumQuery, Const]
Predicate = Union[BoolQuery, Compare]
BoolExpr = Union[AllOf, AnyOf, Not, BoolQuery, Compare]

NUM_TYPES = (NumQuery, Const)
PREDICATE_TYPES = (BoolQuery, Compare)
BOOL_TYPES = (AllOf, AnyOf, Not, BoolQuery, Compare)


@dataclass(frozen=True)
class Rule:
    condition: BoolExpr
    action: Direction


@dataclass(frozen=True)
class Policy:
    rules: tuple[Rule, ...]


def depth(expr: BoolExpr) -> int:
    """Nesting depth of a condition; a bare predicate has depth 1."""
    if isinstance(expr, (AllOf, AnyOf)):
        return 1 + max(depth(c) for c in expr.children)
    if isinstance(expr, Not):
        return 1 + depth(expr.child)
    return 1


class InvalidPolicy(ValueError):
    pass


def _check_num(expr):
    if isinstance(expr, Const):
        if not isinstance(expr.value, int) or not CONST_MIN <= expr.value <= CONST_MAX:
            raise InvalidPolicy(f"constant out of range: {expr.value!r}")
    elif isinstance(expr, NumQuery):
        if expr.call.returns != "num":
            raise InvalidPolicy(f"{expr.call.name} is not numeric")
    else:
        raise InvalidPolicy(f"not a numeric expression: {expr!r}")


def _check_bool(expr):
    if isinstance(expr, (AllOf, AnyOf)):
        if not 1 <= len(expr.children) <= MAX_CHILDREN:
            raise InvalidPolicy(f"{type(expr).__name__} needs 1..{MAX_CHILDREN} children")
        for c in expr.children:
            _check_bool(c)
    elif isinstance(expr, Not):
        _check_bool(expr.child)
    elif isinstance(expr, BoolQuery):
        if expr.call.returns != "bool":
            raise InvalidPolicy(f"{expr.call.name} is not boolean")
    elif isinstance(expr, Compare):
        if expr.op not in COMPARE_OPS:
            raise InvalidPolicy(f"unknown comparison {expr.op!r}")
        _check_num(expr.lhs)
        _check_num(expr.rhs)
    else:
        raise InvalidPolicy(f"not a boolean expression: {expr!r}")


def validate(policy: Policy) -> Policy:
    """Raise :class:`InvalidPolicy` unless every structural cap holds."""
    if not 1 <= len(policy.rules) <= MAX_RULES:
        raise InvalidPolicy(f"policy needs 1..{MAX_RULES} rules, has {len(policy.rules)}")
    for rule in policy.rules:
        if not isinstance(rule.action, Direction):
            raise InvalidPolicy(f"bad action {rule.action!r}")
        _check_bool(rule.condition)
        if depth(rule.condition) > MAX_DEPTH:
            raise InvalidPolicy(f"condition deeper than {MAX_DEPTH}")
    return policy


# --------------------------------------------------------------------------
# Evaluation


def eval_query(call: QueryCall, board: Board, ctx: Optional[QueryContext] = None):
    ctx = ctx or QueryContext(board)
    return QUERIES[call.name].fn(ctx, *call.args)


def eval_num(expr: NumExpr, ctx: QueryContext) -> int:
    if isinstance(expr, Const):
        return expr.value
    return int(eval_query(expr.call, ctx.board, ctx))


def eval_condition(expr: BoolExpr, board: Board, ctx: Optional[QueryContext] = None) -> bool:
    ctx = ctx or QueryContext(board)
    if isinstance(expr, AllOf):
        return all([eval_condition(c, board, ctx) for c in expr.children])
    if isinstance(expr, AnyOf):
        return any([eval_condition(c, board, ctx) for c in expr.children])
    if isinstance(expr, Not):
        return not eval_condition(expr.child, board, ctx)
    if isinstance(expr, BoolQuery):
        return bool(eval_query(expr.call, board, ctx))
    return COMPARE_OPS[expr.op](eval_num(expr.lhs, ctx), eval_num(expr.rhs, ctx))


class NoLegalMove(RuntimeError):
    pass


def fallback_move(ctx: QueryContext) -> Direction:
    for d in FALLBACK_ORDER:
        if ctx.move(d).changed:
            return d
    raise NoLegalMove("board has no legal move")


def decide(policy: Policy, board: Board) -> tuple[Direction, Optional[int]]:
    """Return the chosen move and the index of the rule that fired.

    The rule index is ``None`` when the fallback picked the move.
    """
    ctx = QueryContext(board)
    for i, rule in enumerate(policy.rules):
        if eval_condition(rule.condition, board, ctx) and ctx.move(rule.action).changed:
            return rule.action, i
    return fallback_move(ctx), None


# --------------------------------------------------------------------------
# Traversal helpers shared by the variation operators


Path = tuple  # sequence of (field name, index or None) steps


def children_of(node) -> Iterator[tuple[tuple[str, Optional[int]], object]]:
    if isinstance(node, Policy):
        for i, r in enumerate(node.rules):
            yield ("rules", i), r
    elif isinstance(node, Rule):
        yield ("condition", None), node.condition
    elif isinstance(node, (AllOf, AnyOf)):
        for i, c in enumerate(node.children):
            yield ("children", i), c
    elif isinstance(node, Not):
        yield ("child", None), node.child
    elif isinstance(node, Compare):
        yield ("lhs", None), node.lhs
        yield ("rhs", None), node.rhs
    elif isinstance(node, (BoolQuery, NumQuery)):
        yield ("call", None), node.call


def walk(node, path: Path = ()) -> Iterator[tuple[Path, object]]:
    """Pre-order traversal yielding ``(path, node)`` pairs."""
    yield path, node
    for step, child in children_of(node):
        yield from walk(child, path + (step,))


def get_at(root, path: Path):
    node = root
    for field, idx in path:
        node = getattr(node, field)
        if idx is not None:
            node = node[idx]
    return node


def replace_at(root, path: Path, new):
    if not path:
        return new
    (field, idx), rest = path[0], path[1:]
    current = getattr(root, field)
    if idx is None:
        value = replace_at(current, rest, new)
    else:
        items = list(current)
        items[idx] = replace_at(items[idx], rest, new)
        value = tuple(items)
    return replace(root, **{field: value})


def depth_at(root, path: Path) -> int:
    """Number of boolean nodes above ``path`` (0 for a rule's condition root)."""
    levels = 0
    node = root
    seen_condition = False
    for field, idx in path:
        if seen_condition and isinstance(node, BOOL_TYPES):
            levels += 1
        if field == "condition":
            seen_condition = True
        node = getattr(node, field)
        if idx is not None:
            node = node[idx]
    return levels


def node_count(node) -> int:
    return sum(1 for _ in walk(node))


# --------------------------------------------------------------------------
# JSON form


def _num_to_json(expr):
    if isinstance(expr, Const):
        return {"const": expr.value}
    return _call_to_json(expr.call)


def _call_to_json(call: QueryCall):
    return {"query": call.name, "args": [d.name for d in call.args]}


def _bool_to_json(expr):
    if isinstance(expr, AllOf):
        return {"all": [_bool_to_json(c) for c in expr.children]}
    if isinstance(expr, AnyOf):
        return {"any": [_bool_to_json(c) for c in expr.children]}
    if isinstance(expr, Not):
        return {"not": _bool_to_json(expr.child)}
    if isinstance(expr, BoolQuery):
        return _call_to_json(expr.call)
    return {"cmp": expr.op, "lhs": _num_to_json(expr.lhs), "rhs": _num_to_json(expr.rhs)}


def to_dict(policy: Policy) -> dict:
    return {
        "rules": [
            {"if": _bool_to_json(r.condition), "then": r.action.name} for r in policy.rules
        ]
    }


def _call_from_json(obj) -> QueryCall:
    return QueryCall(obj["query"], tuple(Direction.parse(a) for a in obj.get("args", [])))


def _num_from_json(obj):
    if "const" in obj:
        return Const(int(obj["const"]))
    return NumQuery(_call_from_json(obj))


def _bool_from_json(obj):
    if "all" in obj:
        return AllOf(tuple(_bool_from_json(c) for c in obj["all"]))
    if "any" in obj:
        return AnyOf(tuple(_bool_from_json(c) for c in obj["any"]))
    if "not" in obj:
        return Not(_bool_from_json(obj["not"]))
    if "cmp" in obj:
        return Compare(_num_from_json(obj["lhs"]), obj["cmp"], _num_from_json(obj["rhs"]))
    if "query" in obj:
        return BoolQuery(_call_from_json(obj))
    raise InvalidPolicy(f"unrecognised condition node: {obj!r}")


def from_dict(obj: dict) -> Policy:
    try:
        rules = tuple(
            Rule(_bool_from_json(r["if"]), Direction.parse(r["then"])) for r in obj["rules"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidPolicy):
            raise
        raise InvalidPolicy(f"malformed policy document: {exc}") from None
    return validate(Policy(rules))


def dumps(policy: Policy) -> str:
    return json.dumps(to_dict(policy), indent=2) + "\n"


def loads(text: str) -> Policy:
    return from_dict(json.loads(text))


def load(path) -> Policy:
    with open(path) as fh:
        return loads(fh.read())


def save(policy: Policy, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(policy))
