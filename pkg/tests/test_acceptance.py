"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to watch them stream).

Criterion 6/7 execute the full desk-scale pipeline: the ten suite
functions mirroring the classic competition mix (unimodal + basic
multimodal, shifted and shifted+rotated), D=30, NP=50, 300,000 FEs,
30 fixed-seed runs, three algorithms. Expect minutes of wall time.
"""

import os
import time

import numpy as np
import pytest

from gmde.bench import make_suite
from gmde.cli import EXIT_OK, ExperimentConfig, cmd_compare, cmd_run, cmd_sweep, read_record
from gmde.control import JdeConfig, propose_cr, propose_f
from gmde.core import Population, RngStream
from gmde.engine import PoolConfig, choose_pool
from gmde.mutation import donor, get_strategy, sample_roles
from gmde.stats import wilcoxon_signed_rank

from test_stats import brute_force_two_sided_p

ACCEPT_FUNCTIONS = (
    "shifted-sphere",
    "shifted-schwefel_1_2",
    "rotated-elliptic",
    "shifted-rosenbrock",
    "rotated-griewank",
    "rotated-ackley",
    "shifted-rastrigin",
    "rotated-rastrigin",
    "rotated-weierstrass",
    "rotated-expanded_scaffer_f6",
)

JOBS = max(1, min(4, os.cpu_count() or 1))


def report(number, label, ok):
    print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {label}", flush=True)
    assert ok, f"criterion {number} failed: {label}"


# -------------------------------------------------------------------------
# 1. classic-equation oracle equivalence, bitwise, 1000 random populations


def test_criterion_1_oracle_equivalence():
    started = time.perf_counter()
    gen = np.random.default_rng(123)
    np_size, d = 50, 30
    f_value = 0.6

    def hand(sid, x, roles, f, k):
        b = roles.base
        if sid == "DE/rand/1" or sid == "DE/best/1":
            (p, m), = roles.diffs
            return x[b] + f * (x[p] - x[m])
        if sid == "DE/rand/2" or sid == "DE/best/2":
            (p1, m1), (p2, m2) = roles.diffs
            return x[b] + f * (x[p1] - x[m1]) + f * (x[p2] - x[m2])
        if sid == "DE/current-to-best/1" or sid == "DE/rand-to-best/1":
            (best, echo), (p2, m2) = roles.diffs
            assert echo == b
            return x[b] + f * (x[best] - x[b]) + f * (x[p2] - x[m2])
        if sid == "DE/current-to-rand/1":
            (p1, echo), (p2, m2) = roles.diffs
            assert echo == b
            return x[b] + k * (x[p1] - x[b]) + (k * f) * (x[p2] - x[m2])
        raise AssertionError(sid)

    classics = [
        "DE/rand/1",
        "DE/best/1",
        "DE/rand/2",
        "DE/best/2",
        "DE/current-to-best/1",
        "DE/rand-to-best/1",
        "DE/current-to-rand/1",
    ]
    mismatches = 0
    for trial in range(1000):
        x = gen.uniform(-100, 100, size=(np_size, d))
        fit = gen.uniform(0, 1, size=np_size)
        pop = Population(x, fit)
        target = int(gen.integers(np_size))
        for sid in classics:
            spec = get_strategy(sid)
            rng = RngStream(trial * 31 + 7)
            roles = sample_roles(spec, pop, target, rng)
            k = 0.25 + 0.5 * (trial % 3)
            v = donor(spec, roles, pop, (f_value,) * spec.n, rng, k=k)
            expected = hand(sid, pop.x, roles, f_value, k)
            if not np.array_equal(v, expected):
                mismatches += 1
    elapsed = time.perf_counter() - started
    report(1, f"bitwise oracle equivalence for 7 classic strategies x 1000 populations ({elapsed:.1f}s)", mismatches == 0 and elapsed < 10.0)


# -------------------------------------------------------------------------
# 2. jDE adaptation ranges and change frequencies


def test_criterion_2_jde_ranges():
    cfg = JdeConfig()
    rng = RngStream(20_24)
    n = 100_000
    f, cr = 0.5, 0.9
    f_changes = cr_changes = 0
    ok = True
    for _ in range(n):
        f2 = propose_f(f, cfg, rng)
        cr2 = propose_cr(cr, cfg, rng)
        f_changes += f2 != f
        cr_changes += cr2 != cr
        f, cr = f2, cr2
        ok = ok and (0.1 <= f <= 1.0) and (0.0 <= cr <= 1.0)
    f_rate, cr_rate = f_changes / n, cr_changes / n
    ok = ok and abs(f_rate - 0.1) < 0.01 and abs(cr_rate - 0.1) < 0.01
    report(2, f"F in [0.1,1.0], Cr in [0,1] over 1e5 steps; change rates {f_rate:.4f}/{cr_rate:.4f}", ok)


# -------------------------------------------------------------------------
# 3. pool gate frequency and degenerate rates


def test_criterion_3_pool_gate():
    rng = RngStream(33)
    n = 10_000
    picks = [choose_pool(PoolConfig(ssr=0.5), rng) for _ in range(n)]
    freq = picks.count(1) / n
    ok = 0.485 <= freq <= 0.515
    rng = RngStream(34)
    ok = ok and all(choose_pool(PoolConfig(ssr=0.0), rng) == 2 for _ in range(n))
    rng = RngStream(35)
    ok = ok and all(choose_pool(PoolConfig(ssr=1.0), rng) == 1 for _ in range(n))
    report(3, f"pool-1 rate {freq:.4f} at SSR=0.5; SSR 0/1 never fire the unselected pool", ok)


# -------------------------------------------------------------------------
# 4. Wilcoxon exactness against brute-force enumeration


def test_criterion_4_wilcoxon_exact():
    gen = np.random.default_rng(4)
    checked = 0
    ok = True
    while checked < 100:
        n = int(gen.integers(5, 13))
        a = gen.integers(0, 6, n).astype(float)
        b = gen.integers(0, 6, n).astype(float)
        r = wilcoxon_signed_rank(a, b)
        if r.n_effective < 5:
            continue
        ok = ok and abs(r.p_value - brute_force_two_sided_p(a, b)) < 1e-12
        checked += 1
    fixture = wilcoxon_signed_rank(list(range(10)), [v + 1.0 for v in range(10)])
    ok = ok and fixture.p_value == 2.0 / 1024.0 and fixture.verdict == "w"
    report(4, "exact p matches sign-enumeration oracle on 100 fixtures; all-positive n=10 gives 2/1024", ok)


# -------------------------------------------------------------------------
# 5. benchmark certificates


def test_criterion_5_certificates():
    suite = make_suite(30, 2005)
    worst_cert = 0.0
    worst_orth = 0.0
    for fn in suite:
        worst_cert = max(worst_cert, abs(float(fn(fn.x_optimum)) - fn.transform.bias))
        rot = fn.transform.rotation
        if rot is not None:
            worst_orth = max(worst_orth, float(np.abs(rot.T @ rot - np.eye(30)).max()))
    ok = worst_cert < 1e-8 and worst_orth < 1e-10
    report(5, f"{len(suite)} certificates (worst {worst_cert:.2e}); orthogonality (worst {worst_orth:.2e})", ok)


# -------------------------------------------------------------------------
# 6 + 7. desk-scale relative performance, then byte-identical repetition


def pipeline_config(out_dir):
    return ExperimentConfig(
        dimension=30,
        suite_seed=2005,
        functions=ACCEPT_FUNCTIONS,
        algorithms=("gmde", "GMDE#1", "GMDE#2"),
        population=50,
        max_fes=300_000,
        runs=30,
        base_seed=1000,
        record_every=300,
        report_mode="both",
        out_dir=out_dir,
    )


def run_pipeline(out_dir):
    cfg = pipeline_config(out_dir)
    assert cmd_run(cfg, jobs=JOBS) == EXIT_OK
    assert cmd_compare(cfg, "gmde", ["GMDE#1", "GMDE#2"]) == EXIT_OK
    return cfg


@pytest.fixture(scope="module")
def first_pipeline(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("accept") / "p1")
    run_pipeline(out)
    return out


def margins(out_dir):
    rows = open(os.path.join(out_dir, "reports", "wlt_rows.tsv")).read().splitlines()[1:]
    tally = {}
    for row in rows:
        fields = row.split("\t")
        opp, verdict = fields[2], fields[-1]
        w, l, t = tally.get(opp, (0, 0, 0))
        tally[opp] = (w + (verdict == "w"), l + (verdict == "l"), t + (verdict == "t"))
    return tally


def test_criterion_6_relative_performance(first_pipeline):
    tally = margins(first_pipeline)
    lines = []
    ok = True
    for opp in ("GMDE#1", "GMDE#2"):
        w, l, t = tally[opp]
        lines.append(f"vs {opp}: w={w} l={l} t={t}")
        ok = ok and (w - l) > 0
    report(6, "; ".join(lines) + " (margin must be strictly positive for each)", ok)


def test_criterion_7_pipeline_determinism(first_pipeline, tmp_path_factory):
    out2 = str(tmp_path_factory.mktemp("accept") / "p2")
    run_pipeline(out2)
    ok = True
    compared = []
    for name in ("wlt_rows.tsv", "wlt_table.txt", "means_rows.tsv", "convergence.csv"):
        a = open(os.path.join(first_pipeline, "reports", name), "rb").read()
        b = open(os.path.join(out2, "reports", name), "rb").read()
        compared.append(name)
        ok = ok and a == b
    report(7, f"byte-identical reports across independent pipelines ({', '.join(compared)})", ok)


# -------------------------------------------------------------------------
# 8. preprocess sweep shape


def test_criterion_8_sweep_shape(tmp_path):
    out = str(tmp_path / "sweep")
    cfg = ExperimentConfig(
        suite_seed=2005,
        functions=("shifted-sphere", "shifted-rastrigin"),
        runs=2,
        base_seed=7,
        record_every=10,
        out_dir=out,
    )
    assert cmd_sweep(1, cfg, jobs=JOBS) == EXIT_OK
    rec_dir = os.path.join(out, "records")
    strategies = set()
    budget_ok = True
    for fname in os.listdir(rec_dir):
        rec = read_record(os.path.join(rec_dir, fname))
        strategies.add(rec.algorithm)
        budget_ok = budget_ok and rec.samples[-1][1] <= 10_000 and rec.d == 10 and rec.max_fes == 10_000
    ok = len(strategies) == 27 and budget_ok
    report(8, f"sweep n=1 enumerated {len(strategies)} strategies; 10,000-FE / D=10 budget honored", ok)
