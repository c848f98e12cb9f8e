"""Foundational data model: bounds, individuals, populations, objectives,
seeded randomness, and function-evaluation budgeting.

Everything here is minimization-only; wrap a maximization problem by negating
its objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BudgetError",
    "BudgetExhausted",
    "Bounds",
    "ConfigurationError",
    "EvalBudget",
    "Individual",
    "Objective",
    "Population",
    "RngStream",
    "evaluate",
    "init_population",
]

# jDE warm-start values, also used by the fixed-parameter preprocess mode.
INITIAL_F = 0.5
INITIAL_CR = 0.9


class ConfigurationError(ValueError):
    """A run or operator configuration that can never be executed."""


class BudgetError(ConfigurationError):
    """A budget too small to even start the requested computation."""


class BudgetExhausted(Exception):
    """Raised when an evaluation would exceed the FE budget.

    This is a normal termination signal: the caller must stop the run
    cleanly, not treat it as a failure.
    """


class Bounds:
    """Box constraints: ``lower[i] < upper[i]`` for every coordinate."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise ConfigurationError("lower and upper must be 1-d and equal length")
        if self.lower.size < 1:
            raise ConfigurationError("bounds need at least one dimension")
        if not np.all(self.lower < self.upper):
            raise ConfigurationError("every lower bound must be strictly below its upper bound")
        self.span = self.upper - self.lower
        # scalar fast path for the (common) case of one interval per axis
        self.is_cube = bool(
            np.all(self.lower == self.lower[0]) and np.all(self.upper == self.upper[0])
        )
        self.low_scalar = float(self.lower[0])
        self.high_scalar = float(self.upper[0])

    @property
    def d(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    @classmethod
    def cube(cls, low: float, high: float, d: int) -> "Bounds":
        return cls(np.full(d, float(low)), np.full(d, float(high)))

    def __eq__(self, other):
        return (
            isinstance(other, Bounds)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self):
        return f"Bounds(d={self.d}, lower={self.lower!r}, upper={self.upper!r})"


class RngStream:
    """Seeded random source: same seed, same sequence of draws.

    Scalar draws are served from an internally buffered PCG64 block, which
    makes them cheap enough for per-member use in the generation loop.
    Integers are derived as ``floor(u * n)`` from buffered uniforms (bias
    is O(2^-53), irrelevant at population sizes).
    """

    _BLOCK = 8192

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._buf = self._gen.random(self._BLOCK)
        self._pos = 0

    def uniform(self) -> float:
        """One uniform draw in [0, 1)."""
        if self._pos == self._BLOCK:
            self._buf = self._gen.random(self._BLOCK)
            self._pos = 0
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` uniform draws in [0, 1) as an array."""
        take = self._BLOCK - self._pos
        if n <= take:
            out = self._buf[self._pos : self._pos + n].copy()
            self._pos += n
            return out
        parts = [self._buf[self._pos :]]
        self._pos = self._BLOCK
        n -= take
        while n > self._BLOCK:
            parts.append(self._gen.random(self._BLOCK))
            n -= self._BLOCK
        self._buf = self._gen.random(self._BLOCK)
        parts.append(self._buf[:n])
        self._pos = n
        return np.concatenate(parts)

    def integer(self, low: int, high: int) -> int:
        """One uniform integer in [low, high)."""
        return low + int(self.uniform() * (high - low))

    def distinct_indices(self, n: int, pool: int, exclude=()) -> list[int]:
        """``n`` distinct indices drawn uniformly from range(pool) \\ exclude.

        Raises ConfigurationError when fewer than ``n`` candidates remain.
        """
        taken = sorted(set(exclude))
        if pool - len(taken) < n:
            raise ConfigurationError(
                f"cannot draw {n} distinct indices from {pool} with {len(taken)} excluded"
            )
        out = []
        for _ in range(n):
            r = self.integer(0, pool - len(taken))
            for t in taken:
                if r >= t:
                    r += 1
                else:
                    break
            out.append(r)
            # keep the exclusion list sorted for the shift-past-taken walk
            lo = 0
            for lo in range(len(taken) + 1):
                if lo == len(taken) or taken[lo] > r:
                    break
            taken.insert(lo, r)
        return out


class Objective:
    """Deterministic scalar cost over a box; lower is better.

    Pass ``vectorized=True`` when ``fn`` accepts an (N, D) array and returns
    (N,); ``evaluate_many`` then avoids the per-row Python loop.
    """

    def __init__(self, name: str, bounds: Bounds, fn=None, vectorized: bool = False):
        self.name = name
        self.bounds = bounds
        self._fn = fn
        self.vectorized = vectorized

    def __call__(self, x):
        return self._fn(x)

    def evaluate_many(self, x_rows) -> np.ndarray:
        """Cost of each row of an (N, D) array; N function evaluations."""
        if self.vectorized:
            return np.asarray(self(x_rows), dtype=float)
        return np.array([float(self(row)) for row in x_rows])

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, d={self.bounds.d})"


class EvalBudget:
    """Counts objective calls against a hard maximum."""

    def __init__(self, max_fes: int, used_fes: int = 0):
        if max_fes < 1:
            raise ConfigurationError("max_fes must be positive")
        self.max_fes = int(max_fes)
        self.used_fes = int(used_fes)

    @property
    def remaining(self) -> int:
        return self.max_fes - self.used_fes

    def spend(self, n: int = 1) -> None:
        if self.used_fes + n > self.max_fes:
            raise BudgetExhausted(
                f"{self.used_fes} FEs used, {n} more would exceed max_fes={self.max_fes}"
            )
        self.used_fes += n

    def __repr__(self):
        return f"EvalBudget(used={self.used_fes}, max={self.max_fes})"


@dataclass
class Individual:
    """One candidate solution plus its jDE parameter state.

    ``fitness`` is None until evaluated. ``f_per_strategy`` maps strategy id
    to that strategy's self-adapted scaling factor for this member.
    """

    x: np.ndarray
    fitness: float | None = None
    f_per_strategy: dict[str, float] = field(default_factory=dict)
    cr: float = INITIAL_CR

    def f_for(self, strategy_id: str) -> float:
        return self.f_per_strategy.get(strategy_id, INITIAL_F)

    def copy(self) -> "Individual":
        return Individual(self.x.copy(), self.fitness, dict(self.f_per_strategy), self.cr)


class Population:
    """Fixed-size collection of members, array-backed for the hot loop.

    State lives in ``x`` (NP, D), ``fitness`` (NP,), ``cr`` (NP,) and the
    per-strategy matrix ``f_state`` (strategy id -> (NP,) array).
    ``member(i)`` materializes a snapshot Individual; edits to snapshots do
    not write back.
    """

    def __init__(self, x, fitness, cr=None, f_state=None, generation: int = 0):
        self.x = np.asarray(x, dtype=float)
        self.fitness = np.asarray(fitness, dtype=float)
        if self.x.ndim != 2 or self.fitness.shape != (self.x.shape[0],):
            raise ConfigurationError("population arrays must be (NP, D) and (NP,)")
        n = self.x.shape[0]
        self.cr = np.full(n, INITIAL_CR) if cr is None else np.asarray(cr, dtype=float)
        self.f_state: dict[str, np.ndarray] = {} if f_state is None else f_state
        self.generation = int(generation)
        self.best_index = int(np.argmin(self.fitness))

    @classmethod
    def from_members(cls, members: list[Individual], generation: int = 0) -> "Population":
        x = np.stack([m.x for m in members])
        fit = np.array([np.inf if m.fitness is None else m.fitness for m in members])
        cr = np.array([m.cr for m in members])
        ids = sorted({sid for m in members for sid in m.f_per_strategy})
        f_state = {sid: np.array([m.f_for(sid) for m in members]) for sid in ids}
        return cls(x, fit, cr, f_state, generation)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def ensure_strategy(self, strategy_id: str) -> np.ndarray:
        arr = self.f_state.get(strategy_id)
        if arr is None:
            arr = np.full(len(self), INITIAL_F)
            self.f_state[strategy_id] = arr
        return arr

    def member(self, i: int) -> Individual:
        return Individual(
            self.x[i].copy(),
            float(self.fitness[i]),
            {sid: float(arr[i]) for sid, arr in self.f_state.items()},
            float(self.cr[i]),
        )

    @property
    def members(self) -> list[Individual]:
        return [self.member(i) for i in range(len(self))]

    @property
    def best(self) -> Individual:
        return self.member(self.best_index)

    @property
    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index])

    def refresh_best(self) -> None:
        # np.argmin returns the first minimum: ties break to the lowest index
        self.best_index = int(np.argmin(self.fitness))

    def replace(self, i: int, x: np.ndarray, fitness: float) -> None:
        """Install a winning trial at slot i and update best tracking."""
        self.x[i] = x
        self.fitness[i] = fitness
        b = self.best_index
        if fitness < self.fitness[b] or (fitness == self.fitness[b] and i < b):
            self.best_index = i


def evaluate(ind: Individual, objective: Objective, budget: EvalBudget) -> Individual:
    """Evaluate one individual, spending exactly one FE."""
    budget.spend(1)
    ind.fitness = float(objective(ind.x))
    return ind


def init_population(
    bounds: Bounds,
    size: int,
    rng: RngStream,
    objective: Objective,
    budget: EvalBudget,
    strategy_ids=(),
) -> Population:
    """Uniform-random initial population, fully evaluated.

    Every member starts with F = 0.5 for each strategy in ``strategy_ids``
    and Cr = 0.9 (the fixed-parameter constants double as the jDE warm
    start). Costs ``size`` FEs.
    """
    if size < 5:
        raise ConfigurationError("population size must be at least 5")
    if budget.remaining < size:
        raise BudgetError(
            f"budget remaining ({budget.remaining}) cannot evaluate an initial population of {size}"
        )
    d = bounds.d
    u = rng.uniforms(size * d).reshape(size, d)
    x = bounds.lower + u * bounds.span
    budget.spend(size)
    fit = objective.evaluate_many(x)
    f_state = {sid: np.full(size, INITIAL_F) for sid in strategy_ids}
    return Population(x, fit, np.full(size, INITIAL_CR), f_state, generation=0)
