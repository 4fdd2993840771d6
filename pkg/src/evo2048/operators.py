"""Random policy generation, the four mutators and subtree recombination.

All operators are pure: they take a policy and a random stream and return a
new policy, leaving the input untouched.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable, Optional

from evo2048.engine import Direction
from evo2048.policy import (
    BOOL_TYPES,
    COMPARE_OPS,
    CONST_MAX,
    CONST_MIN,
    MAX_CHILDREN,
    MAX_DEPTH,
    MAX_RULES,
    NUM_TYPES,
    QUERIES,
    QUERY_SPECS,
    AllOf,
    AnyOf,
    BoolQuery,
    Compare,
    Const,
    InvalidPolicy,
    Not,
    NumQuery,
    Policy,
    QueryCall,
    Rule,
    depth,
    depth_at,
    get_at,
    replace_at,
    validate,
    walk,
)

OPS = tuple(COMPARE_OPS)
DIRECTIONS = tuple(Direction)
COMPOUND_LEAF_PROB = 0.5
RECOMBINE_ATTEMPTS = 20


# --------------------------------------------------------------------------
# generators


def random_direction(rng: random.Random) -> Direction:
    return rng.choice(DIRECTIONS)


def random_call(rng: random.Random, returns: Optional[str] = None) -> QueryCall:
    pool = [q for q in QUERY_SPECS if returns is None or q.returns == returns]
    spec = rng.choice(pool)
    return QueryCall(spec.name, tuple(random_direction(rng) for _ in range(spec.arity)))


def random_const(rng: random.Random) -> Const:
    return Const(rng.randint(CONST_MIN, CONST_MAX))


def random_num_expr(rng: random.Random):
    if rng.random() < 0.5:
        return NumQuery(random_call(rng, "num"))
    return random_const(rng)


def random_predicate(rng: random.Random):
    """A single leaf: a boolean query or a comparison on a numeric query."""
    call = random_call(rng)
    if call.returns == "bool":
        return BoolQuery(call)
    return Compare(NumQuery(call), rng.choice(OPS), random_num_expr(rng))


def random_condition(rng: random.Random, max_depth: int = 2):
    if max_depth <= 1 or rng.random() < COMPOUND_LEAF_PROB:
        return random_predicate(rng)
    kind = rng.choice((AllOf, AnyOf, Not))
    if kind is Not:
        return Not(random_condition(rng, max_depth - 1))
    return kind(tuple(random_condition(rng, max_depth - 1) for _ in range(rng.randint(1, 2))))


def random_rule(rng: random.Random, max_depth: int = 2) -> Rule:
    return Rule(random_condition(rng, max_depth), random_direction(rng))


def random_policy(rng: random.Random, n_rules: Optional[int] = None, max_depth: int = MAX_DEPTH) -> Policy:
    """Arbitrary valid policy; used by tests and benchmarks, not by the EA."""
    n = n_rules or rng.randint(1, MAX_RULES)
    return Policy(tuple(random_rule(rng, rng.randint(1, max_depth)) for _ in range(n)))


def initial_policy(rng: random.Random) -> Policy:
    """One rule whose condition is a single leaf."""
    return Policy((Rule(random_predicate(rng), random_direction(rng)),))


# --------------------------------------------------------------------------
# value mutation


def _value_sites(policy: Policy):
    sites = []
    for path, node in walk(policy):
        if isinstance(node, Rule):
            sites.append((path, "action", None))
        elif isinstance(node, Const):
            sites.append((path, "const", None))
        elif isinstance(node, Compare):
            sites.append((path, "op", None))
        elif isinstance(node, QueryCall):
            if _sibling_queries(node):
                sites.append((path, "query", None))
            for i in range(len(node.args)):
                sites.append((path, "arg", i))
    return sites


def _sibling_queries(call: QueryCall) -> list[str]:
    spec = QUERIES[call.name]
    return [
        q.name for q in QUERY_SPECS
        if q.arity == spec.arity and q.returns == spec.returns and q.name != call.name
    ]


def _other(rng, options, current):
    return rng.choice([o for o in options if o != current])


def perturb_const(value: int, rng: random.Random) -> int:
    """Resample a constant: within +-25% or uniformly over the range, 50/50.

    Redraws until the result differs from ``value``.
    """
    while True:
        if rng.random() < 0.5:
            lo = max(CONST_MIN, (3 * value + 3) // 4)
            hi = min(CONST_MAX, (5 * value) // 4)
            new = rng.randint(lo, hi)
        else:
            new = rng.randint(CONST_MIN, CONST_MAX)
        if new != value:
            return new


def mutate_value(policy: Policy, rng: random.Random) -> Policy:
    """Change exactly one leaf value; the tree shape is preserved."""
    path, kind, idx = rng.choice(_value_sites(policy))
    node = get_at(policy, path)
    if kind == "action":
        new = replace(node, action=_other(rng, DIRECTIONS, node.action))
    elif kind == "const":
        new = Const(perturb_const(node.value, rng))
    elif kind == "op":
        new = replace(node, op=_other(rng, OPS, node.op))
    elif kind == "query":
        new = QueryCall(rng.choice(_sibling_queries(node)), node.args)
    else:
        args = list(node.args)
        args[idx] = _other(rng, DIRECTIONS, args[idx])
        new = QueryCall(node.name, tuple(args))
    return replace_at(policy, path, new)


# --------------------------------------------------------------------------
# size mutation


@dataclass(frozen=True)
class _ArraySite:
    path: tuple
    length: int
    cap: int
    level: int  # boolean nesting level of the elements (0 for rules)
    implicit: bool = False  # a lone condition treated as a one-element list

    def can_add(self):
        return self.length < self.cap

    def can_remove(self):
        return self.length > 1


def _array_sites(policy: Policy) -> list[_ArraySite]:
    sites = [_ArraySite((), len(policy.rules), MAX_RULES, 0)]
    for path, node in walk(policy):
        if isinstance(node, (AllOf, AnyOf)):
            lvl = depth_at(policy, path) + 1
            sites.append(_ArraySite(path, len(node.children), MAX_CHILDREN, lvl + 1))
        elif isinstance(node, Rule) and not isinstance(node.condition, (AllOf, AnyOf)):
            # wrapping the lone condition adds one level on top of it
            room = depth(node.condition) < MAX_DEPTH
            sites.append(_ArraySite(path + (("condition", None),), 1, 2 if room else 1, 2, True))
    return [s for s in sites if s.can_add() or s.can_remove()]


def mutate_size(policy: Policy, rng: random.Random) -> Policy:
    """Add or remove one element of one list node (rules or child lists)."""
    site = rng.choice(_array_sites(policy))
    grow = rng.random() < 0.5
    if grow and not site.can_add():
        grow = False
    elif not grow and not site.can_remove():
        grow = True

    if site.implicit:
        lone = get_at(policy, site.path)
        fresh = random_condition(rng, MAX_DEPTH - 1)
        kids = [lone]
        kids.insert(rng.randint(0, 1), fresh)
        wrapper = rng.choice((AllOf, AnyOf))
        return replace_at(policy, site.path, wrapper(tuple(kids)))

    if not site.path:
        items = list(policy.rules)
        fresh = lambda: random_rule(rng, 2)  # noqa: E731
    else:
        node = get_at(policy, site.path)
        items = list(node.children)
        fresh = lambda: random_condition(rng, MAX_DEPTH - site.level + 1)  # noqa: E731
    if grow:
        items.insert(rng.randint(0, len(items)), fresh())
    else:
        del items[rng.randrange(len(items))]
    if not site.path:
        return Policy(tuple(items))
    return replace_at(policy, site.path, replace(node, children=tuple(items)))


# --------------------------------------------------------------------------
# order mutation


def _order_sites(policy: Policy):
    sites = []
    if len(policy.rules) >= 2:
        sites.append(())
    for path, node in walk(policy):
        if isinstance(node, (AllOf, AnyOf)) and len(node.children) >= 2:
            sites.append(path)
    return sites


def can_reorder(policy: Policy) -> bool:
    return bool(_order_sites(policy))


def mutate_order(policy: Policy, rng: random.Random) -> Policy:
    """Swap two elements of one list; returns ``policy`` itself when no list
    has two elements (a no-op, see :func:`can_reorder`)."""
    sites = _order_sites(policy)
    if not sites:
        return policy
    path = rng.choice(sites)
    node = get_at(policy, path)
    items = list(node.rules if not path else node.children)
    i, j = rng.sample(range(len(items)), 2)
    items[i], items[j] = items[j], items[i]
    if not path:
        return Policy(tuple(items))
    return replace_at(policy, path, replace(node, children=tuple(items)))


# --------------------------------------------------------------------------
# rotation


def rotate_node(node, k: int):
    if isinstance(node, Policy):
        return Policy(tuple(rotate_node(r, k) for r in node.rules))
    if isinstance(node, Rule):
        return Rule(rotate_node(node.condition, k), node.action.rotate(k))
    if isinstance(node, (AllOf, AnyOf)):
        return type(node)(tuple(rotate_node(c, k) for c in node.children))
    if isinstance(node, Not):
        return Not(rotate_node(node.child, k))
    if isinstance(node, Compare):
        return Compare(rotate_node(node.lhs, k), node.op, rotate_node(node.rhs, k))
    if isinstance(node, (BoolQuery, NumQuery)):
        return type(node)(rotate_node(node.call, k))
    if isinstance(node, QueryCall):
        return QueryCall(node.name, tuple(d.rotate(k) for d in node.args))
    return node


def mutate_rotate(policy: Policy, rng: random.Random, k: Optional[int] = None) -> Policy:
    """Turn every direction in the policy by ``k`` quarter turns (1-3)."""
    if k is None:
        k = rng.randint(1, 3)
    return rotate_node(policy, k)


# --------------------------------------------------------------------------
# dispatch


@dataclass(frozen=True)
class Mutator:
    name: str
    apply: Callable[[Policy, random.Random], Policy]
    applicable: Callable[[Policy], bool] = lambda p: True


MUTATORS = (
    Mutator("value", mutate_value, lambda p: bool(_value_sites(p))),
    Mutator("size", mutate_size, lambda p: bool(_array_sites(p))),
    Mutator("order", mutate_order, can_reorder),
    Mutator("rotate", mutate_rotate),
)


def applicable_mutators(policy: Policy) -> list[Mutator]:
    return [m for m in MUTATORS if m.applicable(policy)]


def mutate_policy(policy: Policy, rng: random.Random) -> tuple[Policy, str]:
    """Apply exactly one mutator, chosen uniformly among the applicable ones."""
    m = rng.choice(applicable_mutators(policy))
    return m.apply(policy, rng), m.name


# --------------------------------------------------------------------------
# recombination


def _kind(node) -> Optional[str]:
    if isinstance(node, Rule):
        return "rule"
    if isinstance(node, BOOL_TYPES):
        return "bool"
    if isinstance(node, NUM_TYPES):
        return "num"
    return None


def _is_valid(policy: Policy) -> bool:
    try:
        validate(policy)
    except InvalidPolicy:
        return False
    return True


def recombine(a: Policy, b: Policy, rng: random.Random) -> tuple[Policy, Policy]:
    """Swap one subtree of matching kind (rule, condition or number) between
    the parents. Falls back to the unchanged parents if no swap within
    ``RECOMBINE_ATTEMPTS`` tries keeps both children within the caps."""
    nodes_a = [(p, n) for p, n in walk(a) if _kind(n)]
    nodes_b = [(p, n) for p, n in walk(b) if _kind(n)]
    for _ in range(RECOMBINE_ATTEMPTS):
        pa, na = rng.choice(nodes_a)
        matches = [(p, n) for p, n in nodes_b if _kind(n) == _kind(na)]
        if not matches:
            continue
        pb, nb = rng.choice(matches)
        c1, c2 = replace_at(a, pa, nb), replace_at(b, pb, na)
        if _is_valid(c1) and _is_valid(c2):
            return c1, c2
    return a, b
