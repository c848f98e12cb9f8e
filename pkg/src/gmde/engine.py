"""The evolutionary loop: binomial crossover, boundary repair, greedy
selection, single-strategy DE steps, and the two-pool ensemble.

Members are processed sequentially with immediate replacement (asynchronous
update): once a trial wins, later members in the same generation see it.
The ensemble draws its pool gate once per generation, runs every strategy
of the selected pool for each member, crosses all donors with the same Cr,
and lets only the best resulting trial compete for survival.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .bench import BenchFunction
from .control import Fixed, JdeConfig, propose_cr, propose_f
from .core import (
    BudgetError,
    Bounds,
    ConfigurationError,
    EvalBudget,
    Individual,
    Objective,
    Population,
    RngStream,
    init_population,
)
from .mutation import StrategySpec, donor, get_strategy, sample_roles

__all__ = [
    "PoolConfig",
    "RunConfig",
    "RunRecord",
    "binomial_crossover",
    "choose_pool",
    "control_label",
    "greedy_select",
    "repair_bounds",
    "run",
    "step_ensemble",
    "step_single",
]

BOUNDARY_POLICIES = ("reflect", "clamp", "resample")

DEFAULT_POOL1 = ("GMDE#4", "GMDE#6", "GMDE#11", "GMDE#15")
DEFAULT_POOL2 = ("GMDE#1", "GMDE#7", "GMDE#10", "GMDE#13")

ENSEMBLE = "gmde"


@dataclass(frozen=True)
class PoolConfig:
    """Two strategy pools gated per generation by the set selection rate."""

    pool1: tuple[str, ...] = DEFAULT_POOL1
    pool2: tuple[str, ...] = DEFAULT_POOL2
    ssr: float = 0.5

    def __post_init__(self):
        if not self.pool1 or not self.pool2:
            raise ConfigurationError("both pools must be nonempty")
        if not 0.0 <= self.ssr <= 1.0:
            raise ConfigurationError("ssr must be in [0, 1]")
        for sid in (*self.pool1, *self.pool2):
            get_strategy(sid)


@dataclass
class RunConfig:
    """Everything one independent run needs."""

    objective: Objective
    algorithm: str | StrategySpec = ENSEMBLE
    d: int | None = None
    np_size: int = 50
    max_fes: int | None = None  # defaults to d * 10000
    control: Fixed | JdeConfig = field(default_factory=JdeConfig)
    pools: PoolConfig = field(default_factory=PoolConfig)
    boundary: str = "reflect"
    seed: int = 0
    record_every: int = 1

    def resolved(self) -> "RunConfig":
        """Validate and fill defaults; raises before any evaluation."""
        d = self.objective.bounds.d
        if self.d is not None and self.d != d:
            raise ConfigurationError(f"config d={self.d} but objective has d={d}")
        self.d = d
        if self.max_fes is None:
            self.max_fes = d * 10_000
        if self.max_fes < self.np_size:
            raise BudgetError("max_fes below population size")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigurationError(f"unknown boundary policy {self.boundary!r}")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if isinstance(self.algorithm, str) and self.algorithm != ENSEMBLE:
            get_strategy(self.algorithm)
        return self

    @property
    def algorithm_id(self) -> str:
        if isinstance(self.algorithm, StrategySpec):
            return self.algorithm.id
        return self.algorithm


@dataclass
class RunRecord:
    """Per-generation convergence trace of one independent run."""

    algorithm: str
    function: str
    seed: int
    d: int
    np_size: int
    max_fes: int
    boundary: str
    control: str
    samples: list[tuple[int, int, float]]  # (generation, used_fes, best_fitness)
    final_x: np.ndarray
    final_fitness: float
    duration: float


def control_label(mode: Fixed | JdeConfig) -> str:
    if isinstance(mode, Fixed):
        return f"fixed(f={mode.f!r},cr={mode.cr!r})"
    return f"jde(tau1={mode.tau1!r},tau2={mode.tau2!r},f_l={mode.f_l!r},f_u={mode.f_u!r})"


# --------------------------------------------------------------------------
# per-member operators


def binomial_crossover(target: np.ndarray, donor_vec: np.ndarray, cr: float, rng: RngStream) -> np.ndarray:
    """trial[j] = donor[j] where u_j < cr or j == j_rand, else target[j].

    The forced coordinate j_rand guarantees at least one donor component.
    """
    d = target.shape[0]
    if donor_vec.shape[0] != d:
        raise ConfigurationError("target and donor lengths differ")
    mask = rng.uniforms(d) < cr
    mask[rng.integer(0, d)] = True
    return np.where(mask, donor_vec, target)


def repair_bounds(x: np.ndarray, bounds: Bounds, policy: str = "reflect", rng: RngStream | None = None) -> np.ndarray:
    """Force every coordinate inside the box.

    reflect mirrors the overshoot back (repeatedly for wild overshoots),
    clamp pins to the violated bound, resample redraws violated coordinates
    uniformly inside the box. In-bounds input is returned unchanged.
    """
    lo, hi = bounds.lower, bounds.upper
    if bounds.is_cube:
        if bounds.low_scalar <= x.min() and x.max() <= bounds.high_scalar:
            return x
    elif not ((x < lo).any() or (x > hi).any()):
        return x
    if policy == "reflect":
        period = 2.0 * (hi - lo)
        y = np.mod(x - lo, period)
        return lo + np.minimum(y, period - y)
    if policy == "clamp":
        return np.clip(x, lo, hi)
    if policy == "resample":
        out = x.copy()
        bad = (x < lo) | (x > hi)
        k = int(bad.sum())
        out[bad] = lo[bad] + rng.uniforms(k) * (hi - lo)[bad]
        return out
    raise ConfigurationError(f"unknown boundary policy {policy!r}")


def _accepts(trial_fitness: float, current_fitness: float) -> bool:
    # strict improvement only; NaN counts as worst possible
    if math.isnan(trial_fitness):
        return False
    if math.isnan(current_fitness):
        return True
    return trial_fitness < current_fitness


def greedy_select(current: Individual, trial: Individual) -> tuple[Individual, bool]:
    """Trial replaces the incumbent only on strict fitness improvement."""
    if current.fitness is None or trial.fitness is None:
        raise ConfigurationError("greedy selection needs evaluated individuals")
    if _accepts(trial.fitness, current.fitness):
        return trial, True
    return current, False


def choose_pool(pools: PoolConfig, rng: RngStream) -> int:
    """Pool gate: 1 if rand <= ssr else 2, with rand drawn in (0, 1].

    The half-open draw means ssr = 0 never selects pool 1 and ssr = 1
    always does, even at the floating-point edges.
    """
    u = 1.0 - rng.uniform()
    return 1 if u <= pools.ssr else 2


# --------------------------------------------------------------------------
# generation steps


def step_single(
    pop: Population,
    spec: StrategySpec,
    mode: Fixed | JdeConfig,
    objective: Objective,
    budget: EvalBudget,
    rng: RngStream,
    boundary: str = "reflect",
) -> Population:
    """One generation of classic single-strategy DE with greedy selection.

    Truncates cleanly when the budget runs out mid-generation.
    """
    bounds = objective.bounds
    jde = isinstance(mode, JdeConfig)
    f_arr = pop.ensure_strategy(spec.id)
    cr_arr = pop.cr
    fit = pop.fitness
    x = pop.x
    nd = spec.n
    for i in range(len(pop)):
        if budget.remaining < 1:
            break
        if jde:
            f_new = propose_f(f_arr[i], mode, rng)
            cr_new = propose_cr(cr_arr[i], mode, rng)
        else:
            f_new, cr_new = mode.f, mode.cr
        roles = sample_roles(spec, pop, i, rng)
        v = donor(spec, roles, pop, (f_new,) * nd, rng)
        v = repair_bounds(v, bounds, boundary, rng)
        trial = binomial_crossover(x[i], v, cr_new, rng)
        budget.spend(1)
        t_fit = float(objective(trial))
        if _accepts(t_fit, fit[i]):
            pop.replace(i, trial, t_fit)
            if jde:
                f_arr[i] = f_new
                cr_arr[i] = cr_new
    pop.generation += 1
    return pop


def step_ensemble(
    pop: Population,
    pools: PoolConfig,
    mode: Fixed | JdeConfig,
    objective: Objective,
    budget: EvalBudget,
    rng: RngStream,
    boundary: str = "reflect",
) -> Population:
    """One ensemble generation.

    All strategies of the gated pool produce a donor for each member; the
    donors share one proposed Cr, all trials are evaluated (pool-size FEs
    per member), the best trial competes with the member, and only the
    winning strategy's F proposal can survive. Trial ties go to the
    earliest strategy in the pool's declared order.
    """
    bounds = objective.bounds
    jde = isinstance(mode, JdeConfig)
    gate = choose_pool(pools, rng)
    ids = pools.pool1 if gate == 1 else pools.pool2
    specs = [get_strategy(s) if isinstance(s, str) else s for s in ids]
    m = len(specs)
    f_arrs = [pop.ensure_strategy(s.id) for s in specs]
    fit = pop.fitness
    x = pop.x
    trials = np.empty((m, pop.d))
    for i in range(len(pop)):
        if budget.remaining < m:
            break
        if jde:
            f_news = [propose_f(f_arrs[j][i], mode, rng) for j in range(m)]
            cr_new = propose_cr(pop.cr[i], mode, rng)
        else:
            f_news = [mode.f] * m
            cr_new = mode.cr
        for j, spec in enumerate(specs):
            roles = sample_roles(spec, pop, i, rng)
            v = donor(spec, roles, pop, (f_news[j],) * spec.n, rng)
            v = repair_bounds(v, bounds, boundary, rng)
            trials[j] = binomial_crossover(x[i], v, cr_new, rng)
        budget.spend(m)
        t_fits = objective.evaluate_many(trials)
        ranked = np.where(np.isnan(t_fits), np.inf, t_fits)
        j_best = int(np.argmin(ranked))  # first minimum: earliest strategy wins ties
        t_fit = float(t_fits[j_best])
        if _accepts(t_fit, fit[i]):
            pop.replace(i, trials[j_best].copy(), t_fit)
            if jde:
                f_arrs[j_best][i] = f_news[j_best]
                pop.cr[i] = cr_new
    pop.generation += 1
    return pop


# --------------------------------------------------------------------------
# whole runs


def run(config: RunConfig) -> RunRecord:
    """Initialize, loop generations until the budget is exhausted, trace.

    Dispatches to the compiled fast loop when it can represent the run
    exactly (see _fast); the result is identical either way.
    """
    config = config.resolved()
    fast = _encode_for_fast(config)
    if fast is not None:
        return _run_fast(config, fast)
    return _run_python(config)


def _run_python(config: RunConfig) -> RunRecord:
    config = config.resolved()
    objective = config.objective
    rng = RngStream(config.seed)
    budget = EvalBudget(config.max_fes)
    ensemble = config.algorithm == ENSEMBLE
    if ensemble:
        strategy_ids = tuple(config.pools.pool1) + tuple(config.pools.pool2)
        unit = min(len(config.pools.pool1), len(config.pools.pool2))
    else:
        spec = config.algorithm if isinstance(config.algorithm, StrategySpec) else get_strategy(config.algorithm)
        strategy_ids = (spec.id,)
        unit = 1

    started = time.perf_counter()
    pop = init_population(objective.bounds, config.np_size, rng, objective, budget, strategy_ids)
    samples = [(0, budget.used_fes, pop.best_fitness)]
    while budget.remaining >= unit:
        used_before = budget.used_fes
        if ensemble:
            step_ensemble(pop, config.pools, config.control, objective, budget, rng, config.boundary)
        else:
            step_single(pop, spec, config.control, objective, budget, rng, config.boundary)
        if budget.used_fes == used_before:  # selected pool larger than headroom
            break
        if pop.generation % config.record_every == 0:
            samples.append((pop.generation, budget.used_fes, pop.best_fitness))
    last = (pop.generation, budget.used_fes, pop.best_fitness)
    if samples[-1] != last:
        samples.append(last)
    duration = time.perf_counter() - started
    return RunRecord(
        algorithm=config.algorithm_id,
        function=objective.name,
        seed=config.seed,
        d=config.d,
        np_size=config.np_size,
        max_fes=config.max_fes,
        boundary=config.boundary,
        control=control_label(config.control),
        samples=samples,
        final_x=pop.best.x,
        final_fitness=pop.best_fitness,
        duration=duration,
    )


# --------------------------------------------------------------------------
# compiled fast path

_KIND_CODES = {"rand": _fast.K_RAND, "best": _fast.K_BEST, "current": _fast.K_CURRENT, "base": _fast.K_ECHO}
_BOUNDARY_CODES = {"reflect": _fast.B_REFLECT, "clamp": _fast.B_CLAMP, "resample": _fast.B_RESAMPLE}


def _encode_for_fast(config: RunConfig):
    """Strategy/objective encoding for the kernel, or None to use the
    reference path (unsupported blocks, custom objectives, tight NP)."""
    if not _fast.ENABLED:
        return None
    objective = config.objective
    if not isinstance(objective, BenchFunction) or objective._fast_args is None:
        return None
    ensemble = config.algorithm == ENSEMBLE
    if ensemble:
        ids1, ids2 = list(config.pools.pool1), list(config.pools.pool2)
        order: list[StrategySpec] = []
        row = {}
        for sid in ids1 + ids2:
            if sid not in row:
                row[sid] = len(order)
                order.append(get_strategy(sid))
        pool1 = np.array([row[s] for s in ids1], dtype=np.int64)
        pool2 = np.array([row[s] for s in ids2], dtype=np.int64)
    else:
        spec = config.algorithm if isinstance(config.algorithm, StrategySpec) else get_strategy(config.algorithm)
        order = [spec]
        pool1 = pool2 = np.array([0], dtype=np.int64)
    n_max = max(s.n for s in order)
    base_kind = np.empty(len(order), dtype=np.int64)
    n_diffs = np.empty(len(order), dtype=np.int64)
    modes = np.empty(len(order), dtype=np.int64)
    kinds = np.zeros((len(order), 2 * n_max), dtype=np.int64)
    for k, s in enumerate(order):
        code = _KIND_CODES.get(s.base.kind)
        if code is None:
            return None
        base_kind[k] = code
        n_diffs[k] = s.n
        modes[k] = 1 if s.coefficient_mode == "current-to-rand" else 0
        blocks = []
        for pair in s.diffs:
            blocks.extend((pair.plus, pair.minus))
        n_fixed = 1 if s.base.kind in ("best", "current") else 0
        n_rand = 1 if s.base.kind == "rand" else 0
        for j, b in enumerate(blocks):
            code = _KIND_CODES.get(b.kind)
            if code is None:
                return None
            kinds[k, j] = code
            if b.kind == "rand":
                n_rand += 1
            elif b.kind in ("best", "current"):
                n_fixed += 1
        # conservative feasibility: let the reference path raise precisely
        if 1 + n_fixed + n_rand > config.np_size:
            return None
    return {
        "ensemble": ensemble,
        "order": order,
        "base_kind": base_kind,
        "n_diffs": n_diffs,
        "kinds": kinds,
        "modes": modes,
        "pool1": pool1,
        "pool2": pool2,
    }


def _run_fast(config: RunConfig, enc) -> RunRecord:
    objective = config.objective
    cid, shift, rot, has_rot, bias = objective._fast_args
    mode = config.control
    jde = isinstance(mode, JdeConfig)
    if config.np_size < 5:
        raise ConfigurationError("population size must be at least 5")
    started = time.perf_counter()
    gen = np.random.Generator(np.random.PCG64(int(config.seed)))
    samples, final_x, final_fit, _ = _fast.run_kernel(
        gen,
        cid,
        shift,
        rot,
        has_rot,
        bias,
        objective.bounds.lower,
        objective.bounds.upper,
        objective.bounds.is_cube,
        config.np_size,
        config.d,
        config.max_fes,
        enc["ensemble"],
        enc["base_kind"],
        enc["n_diffs"],
        enc["kinds"],
        enc["modes"],
        enc["pool1"],
        enc["pool2"],
        float(config.pools.ssr),
        jde,
        mode.tau1 if jde else 0.0,
        mode.tau2 if jde else 0.0,
        mode.f_l if jde else 0.0,
        mode.f_u if jde else 0.0,
        0.0 if jde else mode.f,
        0.0 if jde else mode.cr,
        _BOUNDARY_CODES[config.boundary],
        config.record_every,
    )
    duration = time.perf_counter() - started
    return RunRecord(
        algorithm=config.algorithm_id,
        function=objective.name,
        seed=config.seed,
        d=config.d,
        np_size=config.np_size,
        max_fes=config.max_fes,
        boundary=config.boundary,
        control=control_label(config.control),
        samples=samples,
        final_x=final_x,
        final_fitness=final_fit,
        duration=duration,
    )
