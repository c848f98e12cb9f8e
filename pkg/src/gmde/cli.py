"""Batch-experiment front end.

Subcommands:

* ``run``       execute runs x algorithms x functions from a config file
* ``sweep``     enumerate the n=1 or n=2 mutation family and rank it under
                the fixed-parameter preprocess settings (D=10, 10k FEs)
* ``compare``   Wilcoxon win/loss/tie reports plus plot-ready convergence CSV
* ``suite-gen`` write the benchmark suite files for a config

Everything is deterministic for a given config: per-run seeds are
``base_seed + run_index``, record files carry no volatile data, and report
files are byte-stable across repeated pipelines. Exit codes: 0 success,
1 configuration error, 2 partial failure (failed or missing cells).
"""

from __future__ import annotations

import argparse
import configparser
import fnmatch
import os
import sys
from dataclasses import dataclass, fields, replace
from multiprocessing import Pool

import numpy as np

from . import bench, stats
from .control import Fixed, JdeConfig
from .core import ConfigurationError
from .engine import PoolConfig, RunConfig, RunRecord, run
from .mutation import StrategySpec, enumerate_family, get_strategy

__all__ = [
    "ExperimentConfig",
    "cmd_compare",
    "cmd_run",
    "cmd_suite_gen",
    "cmd_sweep",
    "main",
    "read_record",
    "record_from_text",
    "record_to_text",
    "write_record",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2

RECORD_HEADER = "# gmde-run-record v1"
MANIFEST_HEADER = "# gmde-manifest v1"


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """A batch experiment; round-trips through an INI-style file."""

    dimension: int = 30
    suite_seed: int = 2005
    functions: tuple[str, ...] = ("shifted-*",)  # fnmatch patterns
    algorithms: tuple[str, ...] = ("gmde", "GMDE#1", "GMDE#2")
    population: int = 50
    max_fes: int = 300_000
    runs: int = 30
    base_seed: int = 1000
    record_every: int = 100
    boundary: str = "reflect"
    control: str = "jde"  # "jde" | "fixed"
    tau1: float = 0.1
    tau2: float = 0.1
    f_l: float = 0.1
    f_u: float = 0.9
    fixed_f: float = 0.5
    fixed_cr: float = 0.9
    pool1: tuple[str, ...] = ("GMDE#4", "GMDE#6", "GMDE#11", "GMDE#15")
    pool2: tuple[str, ...] = ("GMDE#1", "GMDE#7", "GMDE#10", "GMDE#13")
    ssr: float = 0.5
    out_dir: str = "results"
    report_mode: str = "per-function"  # per-function | means | both

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.control not in ("jde", "fixed"):
            raise ConfigurationError(f"unknown control mode {self.control!r}")
        if self.report_mode not in ("per-function", "means", "both"):
            raise ConfigurationError(f"unknown report mode {self.report_mode!r}")

    def control_mode(self) -> Fixed | JdeConfig:
        if self.control == "fixed":
            return Fixed(self.fixed_f, self.fixed_cr)
        return JdeConfig(self.tau1, self.tau2, self.f_l, self.f_u)

    def pools(self) -> PoolConfig:
        return PoolConfig(tuple(self.pool1), tuple(self.pool2), self.ssr)

    def suite(self) -> list[bench.BenchFunction]:
        full = bench.make_suite(self.dimension, self.suite_seed)
        chosen = [
            f for f in full if any(fnmatch.fnmatch(f.name, pat) for pat in self.functions)
        ]
        if not chosen:
            raise ConfigurationError(f"function filter {self.functions} matches nothing")
        return chosen

    def seed_for(self, run_index: int) -> int:
        return self.base_seed + run_index

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigurationError(f"cannot read config file {path}")
        kwargs = {}
        spec = {f.name: f for f in fields(cls)}
        section_map = {
            "suite": ("dimension", "suite_seed", "functions"),
            "experiment": (
                "algorithms", "population", "max_fes", "runs",
                "base_seed", "record_every", "boundary",
            ),
            "control": ("control", "tau1", "tau2", "f_l", "f_u", "fixed_f", "fixed_cr"),
            "ensemble": ("pool1", "pool2", "ssr"),
            "output": ("out_dir", "report_mode"),
        }
        for section, names in section_map.items():
            if not parser.has_section(section):
                continue
            for key in parser[section]:
                if key not in names:
                    raise ConfigurationError(f"unknown key {key!r} in [{section}] of {path}")
            for name in names:
                if name not in parser[section]:
                    continue
                raw = parser[section][name].strip()
                kind = spec[name].type
                if kind == "int":
                    kwargs[name] = int(raw)
                elif kind == "float":
                    kwargs[name] = float(raw)
                elif kind.startswith("tuple"):
                    kwargs[name] = tuple(t.strip() for t in raw.split(",") if t.strip())
                else:
                    kwargs[name] = raw
        return cls(**kwargs)

    def to_file(self, path: str) -> None:
        parser = configparser.ConfigParser()
        parser["suite"] = {
            "dimension": str(self.dimension),
            "suite_seed": str(self.suite_seed),
            "functions": ", ".join(self.functions),
        }
        parser["experiment"] = {
            "algorithms": ", ".join(self.algorithms),
            "population": str(self.population),
            "max_fes": str(self.max_fes),
            "runs": str(self.runs),
            "base_seed": str(self.base_seed),
            "record_every": str(self.record_every),
            "boundary": self.boundary,
        }
        parser["control"] = {
            "control": self.control,
            "tau1": repr(self.tau1),
            "tau2": repr(self.tau2),
            "f_l": repr(self.f_l),
            "f_u": repr(self.f_u),
            "fixed_f": repr(self.fixed_f),
            "fixed_cr": repr(self.fixed_cr),
        }
        parser["ensemble"] = {
            "pool1": ", ".join(self.pool1),
            "pool2": ", ".join(self.pool2),
            "ssr": repr(self.ssr),
        }
        parser["output"] = {"out_dir": self.out_dir, "report_mode": self.report_mode}
        with open(path, "w") as fh:
            parser.write(fh)


# --------------------------------------------------------------------------
# record persistence (durations are kept out so files are byte-reproducible)


def _slug(name: str) -> str:
    return name.replace("#", "").replace("/", "-").replace(" ", "_")


def record_to_text(rec: RunRecord) -> str:
    lines = [
        RECORD_HEADER,
        f"algorithm {rec.algorithm}",
        f"function {rec.function}",
        f"seed {rec.seed}",
        f"d {rec.d}",
        f"np {rec.np_size}",
        f"max_fes {rec.max_fes}",
        f"boundary {rec.boundary}",
        f"control {rec.control}",
        f"final_fitness {rec.final_fitness!r}",
        "final_x " + " ".join(f"{v:.17g}" for v in rec.final_x),
        "trace generation used_fes best_fitness",
    ]
    lines.extend(f"{g} {fes} {best!r}" for g, fes, best in rec.samples)
    return "\n".join(lines) + "\n"


def record_from_text(text: str) -> RunRecord:
    lines = text.strip("\n").split("\n")
    if not lines or lines[0] != RECORD_HEADER:
        raise ConfigurationError("not a v1 run-record")
    meta = {}
    samples = []
    in_trace = False
    for ln in lines[1:]:
        if in_trace:
            g, fes, best = ln.split()
            samples.append((int(g), int(fes), float(best)))
            continue
        key, _, rest = ln.partition(" ")
        if key == "trace":
            in_trace = True
            continue
        meta[key] = rest
    return RunRecord(
        algorithm=meta["algorithm"],
        function=meta["function"],
        seed=int(meta["seed"]),
        d=int(meta["d"]),
        np_size=int(meta["np"]),
        max_fes=int(meta["max_fes"]),
        boundary=meta["boundary"],
        control=meta["control"],
        samples=samples,
        final_x=np.fromstring(meta["final_x"], sep=" "),
        final_fitness=float(meta["final_fitness"]),
        duration=0.0,
    )


def write_record(rec: RunRecord, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(record_to_text(rec))


def read_record(path: str) -> RunRecord:
    with open(path) as fh:
        return record_from_text(fh.read())


# --------------------------------------------------------------------------
# cell execution


def _record_path(records_dir: str, function: str, algorithm_id: str, run_index: int) -> str:
    return os.path.join(records_dir, f"{_slug(function)}__{_slug(algorithm_id)}__r{run_index:03d}.txt")


def _execute_cell(task) -> tuple[tuple[str, str, int], RunRecord]:
    objective, algorithm, cfg, run_index = task
    config = RunConfig(
        objective=objective,
        algorithm=algorithm,
        np_size=cfg.population,
        max_fes=cfg.max_fes,
        control=cfg.control_mode(),
        pools=cfg.pools(),
        boundary=cfg.boundary,
        seed=cfg.seed_for(run_index),
        record_every=cfg.record_every,
    )
    algo_id = algorithm.id if isinstance(algorithm, StrategySpec) else algorithm
    return (objective.name, algo_id, run_index), run(config)


def _run_cells(cfg: ExperimentConfig, suite, algorithms, out_dir: str, force: bool, jobs: int):
    """Execute all (function, algorithm, run) cells, skipping existing records.

    Returns (executed, skipped, failures) where failures lists
    (cell_key, message).
    """
    records_dir = os.path.join(out_dir, "records")
    os.makedirs(records_dir, exist_ok=True)
    algo_ids = [a.id if isinstance(a, StrategySpec) else a for a in algorithms]
    pending, cells = [], []
    for objective in suite:
        for algorithm, algo_id in zip(algorithms, algo_ids):
            for r in range(cfg.runs):
                key = (objective.name, algo_id, r)
                cells.append(key)
                path = _record_path(records_dir, *key)
                if force or not os.path.exists(path):
                    pending.append((objective, algorithm, cfg, r))
    executed, failures = {}, []
    if pending:
        if jobs > 1:
            with Pool(jobs) as pool:
                results = pool.imap_unordered(_try_cell, pending)
                for key, rec, err in results:
                    if err is None:
                        executed[key] = rec
                    else:
                        failures.append((key, err))
        else:
            for task in pending:
                key, rec, err = _try_cell(task)
                if err is None:
                    executed[key] = rec
                else:
                    failures.append((key, err))
    for key, rec in executed.items():
        write_record(rec, _record_path(records_dir, *key))
    _write_manifest(out_dir, cells, records_dir, dict(failures))
    skipped = len(cells) - len(pending)
    return len(executed), skipped, failures


def _try_cell(task):
    key = (task[0].name, task[1].id if isinstance(task[1], StrategySpec) else task[1], task[3])
    try:
        key, rec = _execute_cell(task)
        return key, rec, None
    except Exception as exc:  # worker failures become manifest entries
        return key, None, f"{type(exc).__name__}: {exc}"


def _write_manifest(out_dir: str, cells, records_dir: str, failures) -> None:
    lines = [MANIFEST_HEADER]
    for key in sorted(cells):
        function, algo_id, r = key
        path = _record_path(records_dir, *key)
        if key in failures:
            status = f"failed {failures[key]}"
        elif os.path.exists(path):
            status = "ok"
        else:
            status = "missing"
        rel = os.path.relpath(path, out_dir)
        lines.append(f"cell {function} {algo_id} {r} {status.split()[0]} {rel}")
        if status.startswith("failed"):
            lines.append(f"error {function} {algo_id} {r} {failures[key]}")
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_run(cfg: ExperimentConfig, force: bool = False, jobs: int = 1, out_dir: str | None = None) -> int:
    out_dir = out_dir or cfg.out_dir
    suite = cfg.suite()
    cfg.control_mode()
    cfg.pools()
    for a in cfg.algorithms:
        if a != "gmde":
            get_strategy(a)
    executed, skipped, failures = _run_cells(cfg, suite, list(cfg.algorithms), out_dir, force, jobs)
    print(f"run: {executed} executed, {skipped} skipped, {len(failures)} failed -> {out_dir}")
    for key, err in failures:
        print(f"  failed {key}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_sweep(n: int, cfg: ExperimentConfig, force: bool = False, jobs: int = 1, out_dir: str | None = None) -> int:
    """Preprocess sweep: the whole n=1 or n=2 family under fixed parameters.

    Uses the preprocess settings (D=10, NP=50, 10,000 FEs, F=0.5, Cr=0.9);
    the config only contributes the suite seed, function filter, run count
    and base seed.
    """
    out_dir = out_dir or cfg.out_dir
    sweep_cfg = replace(
        cfg,
        dimension=10,
        population=50,
        max_fes=10_000,
        control="fixed",
        fixed_f=0.5,
        fixed_cr=0.9,
    )
    suite = sweep_cfg.suite()
    family = enumerate_family(n)
    executed, skipped, failures = _run_cells(sweep_cfg, suite, family, out_dir, force, jobs)
    if not failures:
        _write_sweep_report(sweep_cfg, suite, family, out_dir)
    print(
        f"sweep n={n}: {len(family)} strategies, {executed} cells executed, "
        f"{skipped} skipped, {len(failures)} failed -> {out_dir}"
    )
    for key, err in failures:
        print(f"  failed {key}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def _write_sweep_report(cfg: ExperimentConfig, suite, family, out_dir: str) -> None:
    records_dir = os.path.join(out_dir, "records")
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    means_lines = ["function\tstrategy\tnotation\tmean\tstd"]
    best_counts = {s.id: 0 for s in family}
    per_function = []
    for objective in suite:
        cell_summaries = []
        for spec in family:
            recs = [
                read_record(_record_path(records_dir, objective.name, spec.id, r))
                for r in range(cfg.runs)
            ]
            s = stats.summarize(recs)
            cell_summaries.append((spec, s))
            means_lines.append(
                f"{objective.name}\t{spec.id}\t{spec.render()}\t{s.mean!r}\t{s.std!r}"
            )
        best_mean = min(s.mean for _, s in cell_summaries)
        best = [spec.id for spec, s in cell_summaries if s.mean == best_mean]
        for sid in best:
            best_counts[sid] += 1
        per_function.append((objective.name, best, best_mean))
    lines = [f"# sweep ranking over {len(suite)} functions, {cfg.runs} runs each", ""]
    lines.append("best strategy per function (ties listed together):")
    for fname, best, best_mean in per_function:
        lines.append(f"  {fname}: {', '.join(best)} (mean {best_mean!r})")
    lines.append("")
    lines.append("strategies by number of functions where best:")
    ranked = sorted(best_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    by_id = {s.id: s for s in family}
    for sid, count in ranked:
        lines.append(f"  {sid} {count} {by_id[sid].render()}")
    with open(os.path.join(reports_dir, "sweep_ranking.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(reports_dir, "sweep_means.tsv"), "w") as fh:
        fh.write("\n".join(means_lines) + "\n")


def cmd_compare(
    cfg: ExperimentConfig,
    candidate: str,
    opponents: list[str],
    alpha: float = 0.05,
    out_dir: str | None = None,
) -> int:
    out_dir = out_dir or cfg.out_dir
    records_dir = os.path.join(out_dir, "records")
    reports_dir = os.path.join(out_dir, "reports")
    suite = cfg.suite()
    functions = [f.name for f in suite]
    algos = [candidate, *opponents]
    missing = []
    records: dict[tuple[str, str], list[RunRecord]] = {}
    for func in functions:
        for algo in algos:
            cell = []
            for r in range(cfg.runs):
                path = _record_path(records_dir, func, algo, r)
                if not os.path.exists(path):
                    missing.append((algo, func, r))
                else:
                    cell.append(read_record(path))
            records[(algo, func)] = cell
    if missing:
        print("compare: missing result cells:", file=sys.stderr)
        for algo, func, r in missing:
            print(f"  {algo} on {func} run {r}", file=sys.stderr)
        return EXIT_PARTIAL
    values = {key: [rec.final_fitness for rec in cell] for key, cell in records.items()}
    os.makedirs(reports_dir, exist_ok=True)
    table = stats.wlt_table(candidate, opponents, values, alpha, functions=functions)
    with open(os.path.join(reports_dir, "wlt_rows.tsv"), "w") as fh:
        fh.write("\n".join(table.to_rows()) + "\n")
    with open(os.path.join(reports_dir, "wlt_table.txt"), "w") as fh:
        fh.write(table.render())
    if cfg.report_mode in ("means", "both"):
        mean_reports = stats.wilcoxon_on_means(candidate, opponents, values, alpha, functions=functions)
        lines = ["opponent\tn_eff\tsr_plus\tsr_minus\tmr_plus\tmr_minus\tp_value\tverdict"]
        for opp in opponents:
            r = mean_reports[opp]
            lines.append(
                f"{opp}\t{r.n_effective}\t{r.sr_plus!r}\t{r.sr_minus!r}"
                f"\t{r.mr_plus!r}\t{r.mr_minus!r}\t{r.p_value!r}\t{r.verdict}"
            )
        with open(os.path.join(reports_dir, "means_rows.tsv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    conv = ["function,algorithm,run,generation,used_fes,best_fitness"]
    for func in functions:
        for algo in algos:
            for r, rec in enumerate(records[(algo, func)]):
                conv.extend(
                    f"{func},{algo},{r},{g},{fes},{best!r}" for g, fes, best in rec.samples
                )
    with open(os.path.join(reports_dir, "convergence.csv"), "w") as fh:
        fh.write("\n".join(conv) + "\n")
    for opp in opponents:
        w, l, t = table.aggregate[opp]
        print(f"compare: {candidate} vs {opp}: w={w} l={l} t={t}")
    return EXIT_OK


def cmd_suite_gen(cfg: ExperimentConfig, out_dir: str | None = None) -> int:
    directory = os.path.join(out_dir or cfg.out_dir, "suite")
    suite = bench.make_suite(cfg.dimension, cfg.suite_seed, directory)
    print(f"suite-gen: wrote {len(suite)} functions to {directory}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gmde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="override output directory")

    p_run = sub.add_parser("run", help="execute the configured runs")
    add_common(p_run)
    p_run.add_argument("--force", action="store_true", help="recompute existing cells")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker count")

    p_sweep = sub.add_parser("sweep", help="preprocess sweep of a mutation family")
    add_common(p_sweep)
    p_sweep.add_argument("--n", type=int, choices=(1, 2), required=True)
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.add_argument("--jobs", type=int, default=1)

    p_cmp = sub.add_parser("compare", help="Wilcoxon reports from existing records")
    add_common(p_cmp)
    p_cmp.add_argument("--candidate", required=True)
    p_cmp.add_argument("--opponents", nargs="+", required=True)
    p_cmp.add_argument("--alpha", type=float, default=0.05)

    p_gen = sub.add_parser("suite-gen", help="write benchmark suite files")
    add_common(p_gen)

    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.command == "run":
            return cmd_run(cfg, force=args.force, jobs=args.jobs, out_dir=args.out)
        if args.command == "sweep":
            return cmd_sweep(args.n, cfg, force=args.force, jobs=args.jobs, out_dir=args.out)
        if args.command == "compare":
            return cmd_compare(cfg, args.candidate, list(args.opponents), alpha=args.alpha, out_dir=args.out)
        if args.command == "suite-gen":
            return cmd_suite_gen(cfg, out_dir=args.out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
