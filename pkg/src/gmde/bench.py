"""Benchmark objectives: classic continuous cores behind reproducible
shift/rotation transforms.

Transform data is self-generated from a seed (no external data files), so
suites are shareable as plain-text files and every instance carries an
analytically known optimum for certificate checks: plain cores have their
textbook minimum, shifted instances move it by the shift vector, rotated
instances map it through the transpose of the rotation.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import numpy as np

from . import _fast
from .core import Bounds, ConfigurationError, Objective

__all__ = [
    "BenchFunction",
    "CORE_NAMES",
    "TransformData",
    "evaluate_core",
    "make_suite",
    "random_rotation",
    "read_suite",
    "write_suite",
]

_TWO_PI = 2.0 * math.pi

# Weierstrass constants
_W_A, _W_B, _W_KMAX = 0.5, 3.0, 20
_W_APOW = _W_A ** np.arange(_W_KMAX + 1)
_W_BPOW = _W_B ** np.arange(_W_KMAX + 1)
_W_CONST = float(np.sum(_W_APOW * np.cos(math.pi * _W_BPOW)))

# Schwefel 2.26: offset chosen so the core is exactly zero at its optimum
_SCHW_X = 420.9687462275036
_SCHW_C = _SCHW_X * math.sin(math.sqrt(_SCHW_X))


def _axis_weights(cache, maker):
    def lookup(d):
        w = cache.get(d)
        if w is None:
            w = cache[d] = maker(d)
        return w

    return lookup


_elliptic_w = _axis_weights({}, lambda d: np.power(1e6, np.arange(d) / (d - 1)) if d > 1 else np.ones(1))
_griewank_w = _axis_weights({}, lambda d: 1.0 / np.sqrt(np.arange(1.0, d + 1.0)))


def _sphere(z):
    if z.ndim == 1:
        return z @ z
    return (z * z).sum(axis=-1)


def _schwefel_1_2(z):
    c = np.cumsum(z, axis=-1)
    if c.ndim == 1:
        return c @ c
    return (c * c).sum(axis=-1)


def _elliptic(z):
    w = _elliptic_w(z.shape[-1])
    if z.ndim == 1:
        return w @ (z * z)
    return (w * z * z).sum(axis=-1)


def _rosenbrock(z):
    head, tail = z[..., :-1], z[..., 1:]
    return (100.0 * (head * head - tail) ** 2 + (head - 1.0) ** 2).sum(axis=-1)


def _rastrigin(z):
    t = np.cos(_TWO_PI * z)
    t *= -10.0
    t += 10.0
    t += z * z
    return t.sum(axis=-1)


def _ackley(z):
    d = z.shape[-1]
    s1 = np.sqrt((z * z).sum(axis=-1) / d)
    s2 = np.cos(_TWO_PI * z).sum(axis=-1) / d
    return -20.0 * np.exp(-0.2 * s1) - np.exp(s2) + 20.0 + math.e


def _griewank(z):
    s = (z * z).sum(axis=-1) / 4000.0
    p = np.cos(z * _griewank_w(z.shape[-1])).prod(axis=-1)
    return 1.0 + s - p


def _schwefel_2_26(z):
    t = np.abs(z)
    np.sqrt(t, out=t)
    np.sin(t, out=t)
    t *= z
    return _SCHW_C * z.shape[-1] - t.sum(axis=-1)


def _weierstrass(z):
    d = z.shape[-1]
    inner = np.cos(_TWO_PI * _W_BPOW * (z[..., None] + 0.5)) @ _W_APOW
    return np.sum(inner, axis=-1) - d * _W_CONST


def _expanded_scaffer_f6(z):
    x, y = z, np.roll(z, -1, axis=-1)
    ss = x * x + y * y
    return np.sum(0.5 + (np.sin(np.sqrt(ss)) ** 2 - 0.5) / (1.0 + 0.001 * ss) ** 2, axis=-1)


@dataclass(frozen=True)
class _Core:
    fn: object
    low: float
    high: float
    category: str
    opt: float  # every coordinate of the core's minimizer


_CORES = {
    "sphere": _Core(_sphere, -100, 100, "unimodal", 0.0),
    "schwefel_1_2": _Core(_schwefel_1_2, -100, 100, "unimodal", 0.0),
    "elliptic": _Core(_elliptic, -100, 100, "unimodal", 0.0),
    "rosenbrock": _Core(_rosenbrock, -100, 100, "multimodal", 1.0),
    "rastrigin": _Core(_rastrigin, -5, 5, "multimodal", 0.0),
    "ackley": _Core(_ackley, -32, 32, "multimodal", 0.0),
    "griewank": _Core(_griewank, -600, 600, "multimodal", 0.0),
    "schwefel_2_26": _Core(_schwefel_2_26, -500, 500, "multimodal", _SCHW_X),
    "weierstrass": _Core(_weierstrass, -0.5, 0.5, "multimodal", 0.0),
    "expanded_scaffer_f6": _Core(_expanded_scaffer_f6, -100, 100, "multimodal", 0.0),
}

CORE_NAMES = tuple(_CORES)

# the compiled evaluators index cores by position; the orders must agree
assert CORE_NAMES == _fast.CORE_ORDER

# cores whose suite entries also get a shifted+rotated instance
_ROTATED = ("elliptic", "rastrigin", "ackley", "griewank", "weierstrass", "expanded_scaffer_f6")

ORTHOGONALITY_TOL = 1e-10


def evaluate_core(core: str, z) -> float | np.ndarray:
    """Raw core value; z may be (D,) or batched (..., D)."""
    try:
        fn = _CORES[core].fn
    except KeyError:
        raise ConfigurationError(f"unknown core {core!r}") from None
    return fn(np.asarray(z, dtype=float))


@dataclass(eq=False)
class TransformData:
    """Shift, optional rotation, and additive bias applied around a core."""

    shift: np.ndarray
    rotation: np.ndarray | None
    bias: float

    def __post_init__(self):
        self.shift = np.asarray(self.shift, dtype=float)
        if self.rotation is not None:
            self.rotation = np.asarray(self.rotation, dtype=float)
            err = np.abs(self.rotation.T @ self.rotation - np.eye(self.shift.size)).max()
            if err >= ORTHOGONALITY_TOL:
                raise ConfigurationError(f"rotation not orthogonal (max error {err:.3e})")


class BenchFunction(Objective):
    """f(x) = core(R @ (x - shift)) + bias, minimized at a known point.

    With numba present, evaluation goes through the compiled row evaluator
    shared with the fast run loop, so both engine paths see bit-identical
    fitness values.
    """

    def __init__(self, name: str, core: str, transform: TransformData, bounds: Bounds):
        super().__init__(name, bounds, vectorized=True)
        if core not in _CORES:
            raise ConfigurationError(f"unknown core {core!r}")
        self.core = core
        self.transform = transform
        self.category = _CORES[core].category
        self._fast_args = None
        if _fast.ENABLED and core in _fast.CORE_ORDER:
            rot = transform.rotation
            self._fast_args = (
                _fast.CORE_ORDER.index(core),
                transform.shift,
                rot if rot is not None else np.zeros((1, 1)),
                rot is not None,
                float(transform.bias),
            )

    def __call__(self, x):
        if self._fast_args is not None:
            cid, shift, rot, has_rot, bias = self._fast_args
            return _fast.eval_rows(cid, x, shift, rot, has_rot, bias)
        t = self.transform
        z = np.asarray(x, dtype=float) - t.shift
        if t.rotation is not None:
            z = z @ t.rotation.T
        return _CORES[self.core].fn(z) + t.bias

    @property
    def x_optimum(self) -> np.ndarray:
        """Constructed global minimizer (where the value equals the bias)."""
        z_opt = np.full(self.bounds.d, _CORES[self.core].opt)
        t = self.transform
        if t.rotation is not None:
            return t.shift + z_opt @ t.rotation
        return t.shift + z_opt


def random_rotation(d: int, gen: np.random.Generator) -> np.ndarray:
    """Orthonormalize a seeded Gaussian matrix (QR with sign-fixed columns)."""
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    err = np.abs(q.T @ q - np.eye(d)).max()
    if err >= ORTHOGONALITY_TOL:
        raise ConfigurationError(f"orthonormalization failed (max error {err:.3e})")
    return q


def _draw_shift(core: _Core, d: int, rotation, gen: np.random.Generator) -> np.ndarray:
    """Shift uniform in the inner 80% of the box, narrowed so the shifted
    (and possibly rotated) optimum stays strictly inside the box."""
    lo, hi = core.low, core.high
    margin = 0.01 * (hi - lo)
    z_opt = np.full(d, core.opt)
    offset = z_opt @ rotation if rotation is not None else z_opt
    s_lo = np.maximum(0.8 * lo, lo - offset + margin)
    s_hi = np.minimum(0.8 * hi, hi - offset - margin)
    if np.any(s_lo >= s_hi):
        raise ConfigurationError(f"no feasible shift range for this core in [{lo}, {hi}]")
    return s_lo + gen.random(d) * (s_hi - s_lo)


def make_suite(d: int, seed: int, directory: str | None = None) -> list[BenchFunction]:
    """Deterministic benchmark suite: every core plain and shifted, plus
    shifted+rotated instances for the designated cores.

    Same (d, seed) always yields the same transforms. When ``directory``
    is given the suite is also written there, one text file per function.
    """
    if d < 2:
        raise ConfigurationError("suite dimension must be >= 2")
    children = iter(np.random.SeedSequence(seed).spawn(2 * len(_CORES) + len(_ROTATED)))
    suite = []
    for name, core in _CORES.items():
        bounds = Bounds.cube(core.low, core.high, d)
        suite.append(BenchFunction(name, name, TransformData(np.zeros(d), None, 0.0), bounds))
        gen = np.random.default_rng(next(children))
        shift = _draw_shift(core, d, None, gen)
        bias = float(-500.0 + 1000.0 * gen.random())
        suite.append(BenchFunction(f"shifted-{name}", name, TransformData(shift, None, bias), bounds))
    for name in _ROTATED:
        core = _CORES[name]
        bounds = Bounds.cube(core.low, core.high, d)
        gen = np.random.default_rng(next(children))
        rot = random_rotation(d, gen)
        shift = _draw_shift(core, d, rot, gen)
        bias = float(-500.0 + 1000.0 * gen.random())
        suite.append(BenchFunction(f"rotated-{name}", name, TransformData(shift, rot, bias), bounds))
    if directory is not None:
        write_suite(suite, directory)
    return suite


# --------------------------------------------------------------------------
# plain-text persistence (17 significant digits round-trips float64 exactly)


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.atleast_1d(values))


def write_suite(suite: list[BenchFunction], directory: str) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, fn in enumerate(suite):
        path = os.path.join(directory, f"{i:02d}-{fn.name}.txt")
        t = fn.transform
        lines = [
            "# gmde-bench-function v1",
            f"name {fn.name}",
            f"core {fn.core}",
            f"d {fn.bounds.d}",
            f"category {fn.category}",
            f"bias {t.bias:.17g}",
            f"lower {_fmt(fn.bounds.lower)}",
            f"upper {_fmt(fn.bounds.upper)}",
            f"shift {_fmt(t.shift)}",
        ]
        if t.rotation is None:
            lines.append("rotation none")
        else:
            lines.append("rotation rows")
            lines.extend(_fmt(row) for row in t.rotation)
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_suite(directory: str) -> list[BenchFunction]:
    suite = []
    names = sorted(f for f in os.listdir(directory) if re.match(r"\d+-.*\.txt$", f))
    for fname in names:
        with open(os.path.join(directory, fname)) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        if not lines or lines[0] != "# gmde-bench-function v1":
            raise ConfigurationError(f"{fname}: not a v1 bench-function file")
        fields = {}
        rot_rows = []
        in_rotation = False
        for ln in lines[1:]:
            if in_rotation:
                rot_rows.append(np.fromstring(ln, sep=" "))
                continue
            key, _, rest = ln.partition(" ")
            if key == "rotation":
                if rest == "rows":
                    in_rotation = True
                continue
            fields[key] = rest
        d = int(fields["d"])
        rotation = np.vstack(rot_rows) if rot_rows else None
        transform = TransformData(
            np.fromstring(fields["shift"], sep=" "), rotation, float(fields["bias"])
        )
        bounds = Bounds(np.fromstring(fields["lower"], sep=" "), np.fromstring(fields["upper"], sep=" "))
        if bounds.d != d:
            raise ConfigurationError(f"{fname}: dimension mismatch")
        suite.append(BenchFunction(fields["name"], fields["core"], transform, bounds))
    return suite
