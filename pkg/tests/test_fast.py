"""The compiled run loop must be indistinguishable from the reference loop."""

import numpy as np
import pytest

from gmde import _fast
from gmde.bench import make_suite
from gmde.control import Fixed
from gmde.core import Bounds, Objective
from gmde.engine import RunConfig, _encode_for_fast, _run_fast, _run_python
from gmde.mutation import parse_spec

pytestmark = pytest.mark.skipif(not _fast.ENABLED, reason="numba unavailable or disabled")

SUITE = {f.name: f for f in make_suite(12, 77)}


def config(fname, algo, seed, **kw):
    return RunConfig(
        objective=SUITE[fname],
        algorithm=algo,
        max_fes=kw.pop("max_fes", 2400),
        np_size=kw.pop("np_size", 12),
        seed=seed,
        record_every=kw.pop("record_every", 3),
        **kw,
    )


def assert_identical(cfg_a, cfg_b):
    ref = _run_python(cfg_a)
    enc = _encode_for_fast(cfg_b.resolved())
    assert enc is not None
    fast = _run_fast(cfg_b, enc)
    assert ref.samples == fast.samples
    assert np.array_equal(ref.final_x, fast.final_x)
    assert ref.final_fitness == fast.final_fitness


@pytest.mark.parametrize("fname", ["shifted-sphere", "rotated-ackley", "shifted-schwefel_2_26"])
@pytest.mark.parametrize("algo", ["GMDE#1", "GMDE#2", "gmde"])
def test_bitwise_equivalence(fname, algo):
    for seed in (0, 5):
        assert_identical(config(fname, algo, seed), config(fname, algo, seed))


def test_equivalence_fixed_control():
    a = config("shifted-rastrigin", "gmde", 3, control=Fixed(0.5, 0.9))
    b = config("shifted-rastrigin", "gmde", 3, control=Fixed(0.5, 0.9))
    assert_identical(a, b)


@pytest.mark.parametrize("boundary", ["clamp", "resample"])
def test_equivalence_other_boundaries(boundary):
    a = config("shifted-griewank", "gmde", 8, boundary=boundary)
    b = config("shifted-griewank", "gmde", 8, boundary=boundary)
    assert_identical(a, b)


def test_equivalence_every_registry_strategy():
    for i in range(1, 17):
        sid = f"GMDE#{i}"
        assert_identical(config("shifted-elliptic", sid, 2), config("shifted-elliptic", sid, 2))


def test_custom_objective_falls_back():
    obj = Objective("mine", Bounds.cube(-1, 1, 5), lambda x: float(np.sum(np.asarray(x) ** 2)))
    assert _encode_for_fast(RunConfig(objective=obj, np_size=8, max_fes=100).resolved()) is None


def test_exotic_blocks_fall_back():
    spec = parse_spec("GMDE(top:0.2, jDE, rand, rand)")
    cfg = RunConfig(objective=SUITE["shifted-sphere"], algorithm=spec, np_size=8, max_fes=100)
    assert _encode_for_fast(cfg.resolved()) is None


def test_tight_population_falls_back():
    cfg = RunConfig(objective=SUITE["shifted-sphere"], algorithm="GMDE#6", np_size=5, max_fes=100)
    assert _encode_for_fast(cfg.resolved()) is None


def test_objective_values_match_reference_formulas():
    # the compiled row evaluator must agree with the plain numpy cores
    from gmde.bench import evaluate_core

    rng = np.random.default_rng(1)
    for fn in SUITE.values():
        x = rng.uniform(fn.bounds.lower, fn.bounds.upper, size=(5, fn.bounds.d))
        got = fn(x)
        t = fn.transform
        z = x - t.shift
        if t.rotation is not None:
            z = z @ t.rotation.T
        want = evaluate_core(fn.core, z) + t.bias
        assert np.allclose(got, want, rtol=1e-12, atol=1e-9)
