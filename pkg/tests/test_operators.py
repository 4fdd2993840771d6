import collections
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evo2048.engine import Direction as D
from evo2048.evolve import EvoConfig, Individual, init_population, mutate
from evo2048.operators import (
    MUTATORS,
    applicable_mutators,
    can_reorder,
    initial_policy,
    mutate_order,
    mutate_rotate,
    mutate_size,
    mutate_value,
    perturb_const,
    random_policy,
    recombine,
    _array_sites,
)
from evo2048.policy import (
    QUERY_SPECS,
    AllOf,
    AnyOf,
    BoolQuery,
    Compare,
    Const,
    Not,
    NumQuery,
    Policy,
    QueryCall,
    Rule,
    depth,
    get_at,
    validate,
    walk,
)
from evo2048.rng import RandomStream


def leaf(name="maxTileInCorner", *dirs):
    return BoolQuery(QueryCall(name, tuple(dirs)))


def deep(n=4):
    node = leaf()
    for _ in range(n - 1):
        node = Not(node)
    return node


def shape(p):
    return [type(n).__name__ + (str(len(n.args)) if isinstance(n, QueryCall) else "")
            for _, n in walk(p)]


def values(p):
    out = []
    for _, n in walk(p):
        if isinstance(n, Rule):
            out.append(n.action)
        elif isinstance(n, Const):
            out.append(n.value)
        elif isinstance(n, Compare):
            out.append(n.op)
        elif isinstance(n, QueryCall):
            out.append(n.name)
            out.extend(n.args)
    return out


policies = st.integers(0, 2**32).map(lambda s: random_policy(random.Random(s)))


# ---- initial population -------------------------------------------------


def test_initial_population_is_minimal():
    pop = init_population(EvoConfig(population_size=50, evaluation_budget=300), RandomStream(1))
    assert len(pop) == 50
    for ind in pop:
        p = ind.policy
        validate(p)
        assert len(p.rules) == 1
        cond = p.rules[0].condition
        assert depth(cond) == 1
        assert isinstance(cond, (BoolQuery, Compare))
        assert ind.fitness is None


def test_initial_population_deterministic():
    cfg = EvoConfig(population_size=20, evaluation_budget=200)
    assert init_population(cfg, RandomStream(5)) == init_population(cfg, RandomStream(5))
    assert init_population(cfg, RandomStream(5)) != init_population(cfg, RandomStream(6))


def test_initial_leaves_uniform_over_queries():
    rng = RandomStream(3)
    counts = collections.Counter()
    actions = collections.Counter()
    n = 10_000
    for _ in range(n):
        r = initial_policy(rng).rules[0]
        cond = r.condition
        counts[cond.call.name if isinstance(cond, BoolQuery) else cond.lhs.call.name] += 1
        actions[r.action] += 1
    assert set(counts) == {s.name for s in QUERY_SPECS}
    # binomial sd for p=0.1 is 0.003; allow 5 sd
    assert all(abs(c / n - 0.1) < 0.015 for c in counts.values())
    assert all(abs(c / n - 0.25) < 0.025 for c in actions.values())


# ---- value mutation -----------------------------------------------------


def test_perturb_const_range():
    rng = RandomStream(4)
    near = 0
    for _ in range(2000):
        v = perturb_const(100, rng)
        assert v != 100 and 0 <= v <= 4096
        near += 75 <= v <= 125
    assert 0.4 < near / 2000 < 0.6
    assert all(perturb_const(0, rng) != 0 for _ in range(100))
    assert all(perturb_const(4096, rng) != 4096 for _ in range(100))


@given(policies, st.integers(0, 2**32))
def test_value_mutation_changes_one_leaf(p, seed):
    q = mutate_value(p, RandomStream(seed))
    validate(q)
    assert shape(q) == shape(p)
    diffs = [i for i, (a, b) in enumerate(zip(values(p), values(q))) if a != b]
    assert len(diffs) == 1


def test_value_mutation_on_single_leaf_policy():
    p = Policy((Rule(leaf("maxTileInCorner"), D.UP),))
    for s in range(50):
        q = mutate_value(p, RandomStream(s))
        assert q.rules[0].action != D.UP and q.rules[0].condition == p.rules[0].condition


def test_query_resampled_within_signature():
    p = Policy((Rule(leaf("canMoveInDirection", D.LEFT), D.UP),))
    seen = set()
    for s in range(200):
        name = mutate_value(p, RandomStream(s)).rules[0].condition.call.name
        seen.add(name)
    assert seen == {"canMoveInDirection", "willBeSorted"}


# ---- size mutation ------------------------------------------------------


def test_size_forced_add_at_minimum():
    p = Policy((Rule(deep(4), D.UP),))  # no room to wrap the condition
    assert len(_array_sites(p)) == 1
    for s in range(30):
        assert len(mutate_size(p, RandomStream(s)).rules) == 2


def test_size_forced_remove_at_cap():
    p = Policy(tuple(Rule(deep(4), d) for d in list(D) * 3))
    assert len(p.rules) == 12
    for s in range(30):
        assert len(mutate_size(p, RandomStream(s)).rules) == 11


def test_size_wraps_lone_condition():
    p = Policy((Rule(leaf(), D.UP),))
    wrapped = 0
    for s in range(100):
        q = mutate_size(p, RandomStream(s))
        validate(q)
        cond = q.rules[0].condition
        if len(q.rules) == 1:
            assert isinstance(cond, (AllOf, AnyOf)) and len(cond.children) == 2
            assert leaf() in cond.children
            wrapped += 1
        else:
            assert len(q.rules) == 2
    assert 0 < wrapped < 100


@given(policies, st.integers(0, 2**32))
def test_size_changes_target_list_by_one(p, seed):
    rng = RandomStream(seed)
    q = mutate_size(p, rng)
    validate(q)
    before = {s.path: s.length for s in _array_sites(p)}
    changed = []
    for path, n in before.items():
        try:
            node = get_at(q, path)
        except (IndexError, AttributeError):
            continue
        if isinstance(node, Policy):
            m = len(node.rules)
        elif isinstance(node, (AllOf, AnyOf)) and path and path[-1][0] == "condition" \
                and not isinstance(get_at(p, path), (AllOf, AnyOf)):
            m = len(node.children)  # a lone condition was wrapped
        elif isinstance(node, (AllOf, AnyOf)) and isinstance(get_at(p, path), (AllOf, AnyOf)):
            m = len(node.children)
        else:
            continue
        if m != n:
            changed.append(m - n)
    # the rules list or one child list moved by exactly one
    assert changed and changed[0] in (1, -1)
    if len(q.rules) != len(p.rules):
        assert abs(len(q.rules) - len(p.rules)) == 1


# ---- order mutation -----------------------------------------------------


def test_order_swaps_two_rules():
    a, b = Rule(leaf(), D.UP), Rule(leaf(), D.LEFT)
    assert mutate_order(Policy((a, b)), RandomStream(0)) == Policy((b, a))


def test_order_no_op_on_minimal_policy():
    p = Policy((Rule(leaf(), D.UP),))
    assert not can_reorder(p)
    assert mutate_order(p, RandomStream(0)) is p
    assert "order" not in [m.name for m in applicable_mutators(p)]


def _leaf_multiset(p):
    return collections.Counter(repr(n) for _, n in walk(p) if isinstance(n, (QueryCall, Const)))


@given(policies, st.integers(0, 2**32))
def test_order_preserves_elements(p, seed):
    q = mutate_order(p, RandomStream(seed))
    validate(q)
    assert sorted(shape(p)) == sorted(shape(q))
    assert _leaf_multiset(p) == _leaf_multiset(q)
    assert len(q.rules) == len(p.rules)
    if q.rules != p.rules and collections.Counter(p.rules) == collections.Counter(q.rules):
        # the rules list was permuted: exactly two positions differ
        assert sum(x != y for x, y in zip(p.rules, q.rules)) == 2


# ---- rotation -----------------------------------------------------------


def test_rotate_left_to_up():
    p = Policy((Rule(Compare(NumQuery(QueryCall("scoreGains", (D.LEFT, D.LEFT))), ">", Const(12)),
                     D.LEFT),))
    q = mutate_rotate(p, RandomStream(0), k=1)
    assert q == Policy((Rule(Compare(NumQuery(QueryCall("scoreGains", (D.UP, D.UP))), ">", Const(12)),
                             D.UP),))


@given(policies)
def test_rotate_four_times_is_identity(p):
    q = p
    for _ in range(4):
        q = mutate_rotate(q, RandomStream(0), k=1)
    assert q == p


@given(policies, st.integers(0, 2**32))
def test_rotate_touches_only_directions(p, seed):
    q = mutate_rotate(p, RandomStream(seed))
    assert shape(q) == shape(p)
    for a, b in zip(values(p), values(q)):
        if isinstance(a, D):
            assert b != a
        else:
            assert a == b


# ---- mutate dispatch ----------------------------------------------------


def test_mutate_applies_one_uniform_mutator():
    a, b = Rule(leaf(), D.UP), Rule(Compare(NumQuery(QueryCall("emptyCells")), "<", Const(5)), D.LEFT)
    ind = Individual(Policy((a, b)))
    assert len(applicable_mutators(ind.policy)) == 4
    rng = RandomStream(12)
    counts = collections.Counter()
    for _ in range(10_000):
        child = mutate(ind, rng)
        counts[child.mutator] += 1
        assert child.fitness is None
    assert set(counts) == {m.name for m in MUTATORS}
    for name, c in counts.items():
        assert abs(c / 10_000 - 0.25) <= 0.02, (name, c)


# ---- recombination ------------------------------------------------------


def test_recombine_swaps_whole_rules():
    a = Policy((Rule(leaf(), D.UP),))
    b = Policy((Rule(leaf("canMoveInDirection", D.DOWN), D.RIGHT),))
    swapped = 0
    for s in range(100):
        c1, c2 = recombine(a, b, RandomStream(s))
        if c1 == b:
            assert c2 == a
            swapped += 1
    assert swapped > 0


@given(policies, policies, st.integers(0, 2**32))
def test_recombine_exchanges_matching_subtrees(a, b, seed):
    c1, c2 = recombine(a, b, RandomStream(seed))
    validate(c1)
    validate(c2)
    # a swap moves leaves between parents without creating or losing any
    assert _leaf_multiset(a) + _leaf_multiset(b) == _leaf_multiset(c1) + _leaf_multiset(c2)
    assert len(c1.rules) + len(c2.rules) == len(a.rules) + len(b.rules)


class _PinnedChoice(RandomStream):
    """Picks the deepest node of the first parent and the root condition of the second."""

    def __init__(self):
        super().__init__(0)
        self.calls = 0

    def choice(self, seq):
        self.calls += 1
        return seq[-1] if self.calls % 2 else seq[1]


def test_recombine_falls_back_to_parents():
    a = Policy((Rule(deep(4), D.UP),))
    b = Policy((Rule(deep(4), D.DOWN),))
    rng = _PinnedChoice()
    assert recombine(a, b, rng) == (a, b)
    assert rng.calls == 40


@pytest.mark.parametrize("op", [m.apply for m in MUTATORS], ids=[m.name for m in MUTATORS])
def test_operators_preserve_invariants_many(op):
    rng = RandomStream(77)
    p = initial_policy(rng)
    for _ in range(2000):
        p = validate(op(p, rng))
