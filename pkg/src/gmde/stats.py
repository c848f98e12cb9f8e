"""Run summaries and Wilcoxon signed-rank comparison machinery.

The signed-rank test here is paired per run: differences are
``opponent - candidate``, so positive ranks favor the candidate under
minimization. Zero differences are dropped, tied absolute differences get
average ranks, and the two-sided p-value is exact (full sign enumeration,
computed by dynamic programming over the rank multiset) up to 20 effective
pairs, switching to the tie-corrected normal approximation above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError

__all__ = [
    "MissingCells",
    "RunSummary",
    "WilcoxonReport",
    "WltTable",
    "summarize",
    "wilcoxon_on_means",
    "wilcoxon_signed_rank",
    "wlt_table",
]

EXACT_LIMIT = 20  # largest n for the exact sign-enumeration p-value

WIN, LOSS, TIE = "w", "l", "t"


@dataclass(frozen=True)
class RunSummary:
    algorithm: str
    function: str
    n_runs: int
    mean: float
    std: float
    min: float
    max: float
    median: float


def summarize(records) -> RunSummary:
    """Aggregate final best fitnesses of one (algorithm, function) cell.

    ``std`` is the sample standard deviation, 0 by convention for a single
    run.
    """
    if not records:
        raise ConfigurationError("cannot summarize zero records")
    algos = {r.algorithm for r in records}
    funcs = {r.function for r in records}
    if len(algos) != 1 or len(funcs) != 1:
        raise ConfigurationError("records mix algorithms or functions")
    v = np.array([r.final_fitness for r in records], dtype=float)
    return RunSummary(
        algorithm=algos.pop(),
        function=funcs.pop(),
        n_runs=len(v),
        mean=float(np.mean(v)),
        std=float(np.std(v, ddof=1)) if len(v) > 1 else 0.0,
        min=float(np.min(v)),
        max=float(np.max(v)),
        median=float(np.median(v)),
    )


@dataclass(frozen=True)
class WilcoxonReport:
    n_effective: int
    sr_plus: float
    sr_minus: float
    mr_plus: float
    mr_minus: float
    p_value: float
    verdict: str  # "w" | "l" | "t" from the candidate's point of view


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, sr_plus: float) -> float:
    # count subsets of the rank multiset by sum; ranks are multiples of 1/2,
    # so doubling makes every sum an exact integer
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[: total + 1 - r]
    w2 = int(round(2.0 * sr_plus))
    low = min(w2, total - w2)
    p = 2.0 * counts[: low + 1].sum() / 2.0 ** len(ranks)
    return min(1.0, p)


def _approx_two_sided_p(ranks: np.ndarray, sr_plus: float) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= np.sum(tie_counts.astype(float) ** 3 - tie_counts) / 48.0
    dev = max(abs(sr_plus - mu) - 0.5, 0.0)  # continuity correction
    if var <= 0:
        return 1.0
    return math.erfc(dev / math.sqrt(2.0 * var))


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> WilcoxonReport:
    """Paired two-sided test of candidate ``a`` against opponent ``b``.

    Fewer than 5 nonzero differences cannot reach significance and are
    reported as a tie with p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigurationError("paired samples must be 1-d and equal length")
    diffs = b - a
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        return WilcoxonReport(0, 0.0, 0.0, 0.0, 0.0, 1.0, TIE)
    ranks = _average_ranks(np.abs(diffs))
    pos = diffs > 0
    sr_plus = float(ranks[pos].sum())
    sr_minus = float(ranks[~pos].sum())
    n_pos = int(pos.sum())
    mr_plus = sr_plus / n_pos if n_pos else 0.0
    mr_minus = sr_minus / (n - n_pos) if n - n_pos else 0.0
    if n < 5:
        return WilcoxonReport(n, sr_plus, sr_minus, mr_plus, mr_minus, 1.0, TIE)
    if n <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, sr_plus)
    else:
        p = _approx_two_sided_p(ranks, sr_plus)
    if p < alpha and sr_plus > sr_minus:
        verdict = WIN
    elif p < alpha and sr_plus < sr_minus:
        verdict = LOSS
    else:
        verdict = TIE
    return WilcoxonReport(n, sr_plus, sr_minus, mr_plus, mr_minus, p, verdict)


# --------------------------------------------------------------------------
# win/loss/tie tables


class MissingCells(ConfigurationError):
    def __init__(self, cells):
        self.cells = list(cells)
        listing = ", ".join(f"{a} on {f}" for a, f in self.cells)
        super().__init__(f"missing result cells: {listing}")


@dataclass(frozen=True)
class WltRow:
    function: str
    candidate: str
    opponent: str
    report: WilcoxonReport


@dataclass
class WltTable:
    candidate: str
    alpha: float
    rows: list[WltRow]
    aggregate: dict[str, tuple[int, int, int]]  # opponent -> (w, l, t)

    HEADER = "function\tcandidate\topponent\tn_eff\tsr_plus\tsr_minus\tmr_plus\tmr_minus\tp_value\tverdict"

    def to_rows(self) -> list[str]:
        out = [self.HEADER]
        for row in self.rows:
            r = row.report
            out.append(
                f"{row.function}\t{row.candidate}\t{row.opponent}\t{r.n_effective}"
                f"\t{r.sr_plus!r}\t{r.sr_minus!r}\t{r.mr_plus!r}\t{r.mr_minus!r}"
                f"\t{r.p_value!r}\t{r.verdict}"
            )
        return out

    def render(self) -> str:
        lines = [f"candidate: {self.candidate}   alpha: {self.alpha!r}", ""]
        opponents = list(self.aggregate)
        width = max(len(r.function) for r in self.rows) if self.rows else 8
        lines.append("function".ljust(width) + "".join(f"  {o:>18}" for o in opponents))
        by_func: dict[str, dict[str, str]] = {}
        for row in self.rows:
            by_func.setdefault(row.function, {})[row.opponent] = row.report.verdict
        for func, verdicts in by_func.items():
            lines.append(func.ljust(width) + "".join(f"  {verdicts[o]:>18}" for o in opponents))
        lines.append("")
        for o in opponents:
            w, l, t = self.aggregate[o]
            lines.append(f"vs {o}: w={w} l={l} t={t}")
        return "\n".join(lines) + "\n"


def wlt_table(candidate, opponents, values, alpha: float = 0.05, functions=None) -> WltTable:
    """Per-function Wilcoxon verdicts of ``candidate`` against each opponent.

    ``values`` maps (algorithm, function) to the run-paired final fitness
    list. Absent cells raise MissingCells listing every absent combination.
    """
    if functions is None:
        functions = sorted({f for (a, f) in values if a == candidate})
    missing = [
        (algo, func)
        for func in functions
        for algo in (candidate, *opponents)
        if (algo, func) not in values
    ]
    if missing:
        raise MissingCells(missing)
    rows = []
    aggregate = {}
    for opp in opponents:
        w = l = t = 0
        for func in functions:
            report = wilcoxon_signed_rank(values[(candidate, func)], values[(opp, func)], alpha)
            rows.append(WltRow(func, candidate, opp, report))
            if report.verdict == WIN:
                w += 1
            elif report.verdict == LOSS:
                l += 1
            else:
                t += 1
        aggregate[opp] = (w, l, t)
    rows.sort(key=lambda r: (r.function, opponents.index(r.opponent) if r.opponent in opponents else 0))
    return WltTable(candidate, alpha, rows, aggregate)


def wilcoxon_on_means(candidate, opponents, values, alpha: float = 0.05, functions=None):
    """One test per opponent pairing per-function mean values across functions."""
    if functions is None:
        functions = sorted({f for (a, f) in values if a == candidate})
    out = {}
    for opp in opponents:
        a = [float(np.mean(values[(candidate, f)])) for f in functions]
        b = [float(np.mean(values[(opp, f)])) for f in functions]
        out[opp] = wilcoxon_signed_rank(a, b, alpha)
    return out
