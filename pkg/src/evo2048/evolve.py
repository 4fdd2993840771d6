"""Generational evolutionary search over policies."""
from __future__ import annotations

import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import IO, Callable, Optional, Sequence

from evo2048.engine import GameResult
from evo2048.fitness import (
    OBJECTIVES,
    FitnessStats,
    games_from_record,
    play_games,
    stats_from_games,
    write_protocol,
)
from evo2048.operators import initial_policy, mutate_policy, recombine
from evo2048.policy import Policy
from evo2048.rng import RandomStream, derive_seed

log = logging.getLogger(__name__)

DEFAULT_PRIORITY = ("avg_highest_tile", "max_highest_tile", "avg_total_score")
COMPARATOR_MODES = ("pareto", "lexicographic")

# stream tags keep selection randomness and game seeds apart
_EA_STREAM = 1
_GAME_STREAM = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 100
    games_per_eval: int = 6
    evaluation_budget: int = 200_000
    seed: int = 0
    recombination_rate: float = 0.7
    tournament_size: int = 2
    elitism: int = 1
    objective_priority: tuple[str, ...] = DEFAULT_PRIORITY
    comparator_mode: str = "pareto"
    reevaluate_elites: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.games_per_eval < 1:
            raise ConfigError("games_per_eval must be at least 1")
        if self.evaluation_budget < self.generation_cost:
            raise ConfigError(
                f"evaluation_budget {self.evaluation_budget} is smaller than one generation "
                f"({self.generation_cost} games)"
            )
        if not 0.0 <= self.recombination_rate <= 1.0:
            raise ConfigError("recombination_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be at least 1")
        if not 0 <= self.elitism < self.population_size:
            raise ConfigError("elitism must lie in [0, population_size)")
        if not self.objective_priority:
            raise ConfigError("objective_priority must name at least one objective")
        for obj in self.objective_priority:
            if obj not in OBJECTIVES:
                raise ConfigError(f"unknown objective {obj!r}; choose from {', '.join(OBJECTIVES)}")
        if self.comparator_mode not in COMPARATOR_MODES:
            raise ConfigError(f"comparator_mode must be one of {COMPARATOR_MODES}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def generation_cost(self) -> int:
        return self.population_size * self.games_per_eval

    @classmethod
    def from_text(cls, text: str) -> "EvoConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(key, types[key], val, lineno)
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "EvoConfig":
        try:
            with open(path) as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(str(exc)) from None

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(key, typ, val, lineno):
    try:
        if typ == "int":
            return int(val.replace("_", ""))
        if typ == "float":
            return float(val)
        if typ == "bool":
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        if typ.startswith("tuple"):
            return tuple(s.strip() for s in val.split(",") if s.strip())
        return val
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None


# --------------------------------------------------------------------------
# comparator


def dominates(a: FitnessStats, b: FitnessStats, objectives: Sequence[str]) -> bool:
    """Pareto dominance, every objective maximised."""
    va = [a.value(o) for o in objectives]
    vb = [b.value(o) for o in objectives]
    return all(x >= y for x, y in zip(va, vb)) and any(x > y for x, y in zip(va, vb))


def compare(a: FitnessStats, b: FitnessStats, priority: Sequence[str] = DEFAULT_PRIORITY,
            mode: str = "pareto") -> int:
    """Return 1 if ``a`` is better, -1 if ``b`` is better, 0 if equal.

    In ``pareto`` mode dominance decides first; incomparable or equal pairs
    fall through to a lexicographic comparison in priority order.
    """
    if mode == "pareto":
        if dominates(a, b, priority):
            return 1
        if dominates(b, a, priority):
            return -1
    for obj in priority:
        x, y = a.value(obj), b.value(obj)
        if x != y:
            return 1 if x > y else -1
    return 0


# --------------------------------------------------------------------------
# population


@dataclass(frozen=True)
class Individual:
    policy: Policy
    fitness: Optional[FitnessStats] = None
    birth_generation: int = 0
    mutator: Optional[str] = None
    games: tuple[GameResult, ...] = ()


def init_population(cfg: EvoConfig, rng: RandomStream) -> list[Individual]:
    return [Individual(initial_policy(rng)) for _ in range(cfg.population_size)]


def mutate(ind: Individual, rng: RandomStream, generation: int = 0) -> Individual:
    policy, name = mutate_policy(ind.policy, rng)
    return Individual(policy, None, generation, name)


def game_seeds(run_seed: int, generation: int, individual: int, games: int) -> list[int]:
    return [derive_seed(run_seed, _GAME_STREAM, generation, individual, g) for g in range(games)]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_max_tile: int
    best_avg_tile: float
    gen_mean_max_tile: float
    gen_mean_avg_tile: float
    best_avg_score: float


HISTORY_HEADER = "generation,best_max_tile,best_avg_tile,gen_mean_max_tile,gen_mean_avg_tile,best_avg_score"


def best_index(stats: Sequence[FitnessStats], priority=DEFAULT_PRIORITY, mode="pareto") -> int:
    best = 0
    for i in range(1, len(stats)):
        if compare(stats[i], stats[best], priority, mode) > 0:
            best = i
    return best


def generation_record(generation: int, stats: Sequence[FitnessStats],
                      priority=DEFAULT_PRIORITY, mode="pareto") -> GenerationRecord:
    best = stats[best_index(stats, priority, mode)]
    n = len(stats)
    return GenerationRecord(
        generation=generation,
        best_max_tile=best.max_highest_tile,
        best_avg_tile=best.avg_highest_tile,
        gen_mean_max_tile=sum(s.max_highest_tile for s in stats) / n,
        gen_mean_avg_tile=sum(s.avg_highest_tile for s in stats) / n,
        best_avg_score=best.avg_total_score,
    )


def history_csv(history: Sequence[GenerationRecord]) -> str:
    rows = [HISTORY_HEADER]
    for r in history:
        rows.append(",".join(repr(v) for v in (
            r.generation, r.best_max_tile, r.best_avg_tile,
            r.gen_mean_max_tile, r.gen_mean_avg_tile, r.best_avg_score,
        )))
    return "\n".join(rows) + "\n"


def history_from_protocol(records: Sequence[dict], priority=DEFAULT_PRIORITY,
                          mode="pareto") -> list[GenerationRecord]:
    """Rebuild the per-generation series from protocol records alone."""
    by_gen: dict[int, list[dict]] = {}
    for rec in records:
        by_gen.setdefault(rec["gen"], []).append(rec)
    history = []
    for gen in sorted(by_gen):
        recs = sorted(by_gen[gen], key=lambda r: r["ind"])
        stats = [stats_from_games(games_from_record(r)) for r in recs]
        history.append(generation_record(gen, stats, priority, mode))
    return history


# --------------------------------------------------------------------------
# main loop

Player = Callable[[Policy, Sequence[int]], list]


def _default_player(policy: Policy, seeds: Sequence[int]) -> list[GameResult]:
    return play_games(policy, seeds)


def _play_job(args):
    player, policy, seeds = args
    return player(policy, seeds)


@dataclass
class EvolutionResult:
    best: Individual
    history: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0

    @property
    def generations(self) -> int:
        return len(self.history)


def _tournament(pop: Sequence[Individual], cfg: EvoConfig, rng: RandomStream) -> Individual:
    winner = pop[rng.randrange(len(pop))]
    for _ in range(cfg.tournament_size - 1):
        rival = pop[rng.randrange(len(pop))]
        if compare(rival.fitness, winner.fitness, cfg.objective_priority, cfg.comparator_mode) > 0:
            winner = rival
    return winner


def rank(pop: Sequence[Individual], cfg: EvoConfig) -> list[Individual]:
    """Best first; ties keep population order."""
    key = functools.cmp_to_key(
        lambda a, b: compare(b.fitness, a.fitness, cfg.objective_priority, cfg.comparator_mode)
    )
    return sorted(pop, key=key)


def next_generation(pop: Sequence[Individual], cfg: EvoConfig, rng: RandomStream,
                    generation: int) -> list[Individual]:
    new = list(rank(pop, cfg)[: cfg.elitism])
    while len(new) < cfg.population_size:
        a = _tournament(pop, cfg, rng)
        b = _tournament(pop, cfg, rng)
        if rng.random() < cfg.recombination_rate:
            pa, pb = recombine(a.policy, b.policy, rng)
        else:
            pa, pb = a.policy, b.policy
        for p in (pa, pb):
            if len(new) < cfg.population_size:
                new.append(mutate(Individual(p), rng, generation))
    return new


def run_evolution(cfg: EvoConfig, player: Optional[Player] = None,
                  protocol: Optional[IO[str]] = None,
                  on_generation: Optional[Callable[[GenerationRecord], None]] = None) -> EvolutionResult:
    """Evolve until the remaining budget cannot pay for another generation.

    ``player(policy, seeds)`` returns one :class:`GameResult` per seed and
    defaults to the compiled simulator. Every played game counts against
    ``cfg.evaluation_budget``.
    """
    player = player or _default_player
    rng = RandomStream(derive_seed(cfg.seed, _EA_STREAM))
    pop = init_population(cfg, rng)
    result = EvolutionResult(best=pop[0])
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    gen = 0
    try:
        while True:
            todo = [i for i, ind in enumerate(pop) if cfg.reevaluate_elites or ind.fitness is None]
            cost = len(todo) * cfg.games_per_eval
            if result.evaluations + cost > cfg.evaluation_budget:
                break
            jobs = [(player, pop[i].policy, game_seeds(cfg.seed, gen, i, cfg.games_per_eval))
                    for i in todo]
            outcomes = list(pool.map(_play_job, jobs)) if pool else [_play_job(j) for j in jobs]
            games_of = dict(zip(todo, outcomes))
            result.evaluations += cost
            for i, games in games_of.items():
                pop[i] = replace(pop[i], fitness=stats_from_games(games), games=tuple(games))
            if protocol is not None:
                for i, ind in enumerate(pop):
                    write_protocol(protocol, gen, i, ind.games, cached=i not in games_of)

            stats = [ind.fitness for ind in pop]
            record = generation_record(gen, stats, cfg.objective_priority, cfg.comparator_mode)
            result.history.append(record)
            result.best = pop[best_index(stats, cfg.objective_priority, cfg.comparator_mode)]
            if on_generation:
                on_generation(record)
            log.debug("generation %d: %s", gen, record)
            gen += 1
            pop = next_generation(pop, cfg, rng, gen)
    finally:
        if pool:
            pool.shutdown()
    return result

