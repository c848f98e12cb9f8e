import os

import numpy as np
import pytest

from gmde import cli
from gmde.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    ExperimentConfig,
    cmd_compare,
    cmd_run,
    cmd_suite_gen,
    cmd_sweep,
    main,
    read_record,
    record_from_text,
    record_to_text,
)
from gmde.core import ConfigurationError
from gmde.engine import RunConfig, run
from gmde.bench import make_suite


def small_config(out_dir, **kw):
    defaults = dict(
        dimension=6,
        suite_seed=7,
        functions=("shifted-sphere", "shifted-rastrigin"),
        algorithms=("gmde", "GMDE#1"),
        population=10,
        max_fes=800,
        runs=3,
        base_seed=100,
        record_every=5,
        out_dir=out_dir,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestExperimentConfig:
    def test_file_round_trip(self, tmp_path):
        cfg = small_config(str(tmp_path / "out"), report_mode="both", ssr=0.25)
        path = str(tmp_path / "exp.cfg")
        cfg.to_file(path)
        assert ExperimentConfig.from_file(path) == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[suite]\ndimensionz = 3\n")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_file(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_file("/nonexistent/exp.cfg")

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(runs=0)
        with pytest.raises(ConfigurationError):
            ExperimentConfig(control="nope")

    def test_empty_function_filter(self, tmp_path):
        cfg = small_config(str(tmp_path), functions=("matches-nothing-*",))
        with pytest.raises(ConfigurationError):
            cfg.suite()

    def test_seed_derivation(self):
        cfg = small_config("x", base_seed=40)
        assert [cfg.seed_for(i) for i in range(3)] == [40, 41, 42]


class TestRecordSerialization:
    def test_round_trip(self):
        suite = {f.name: f for f in make_suite(6, 7)}
        rec = run(RunConfig(objective=suite["shifted-sphere"], algorithm="gmde", np_size=10, max_fes=400, seed=5))
        text = record_to_text(rec)
        back = record_from_text(text)
        assert back.algorithm == rec.algorithm
        assert back.function == rec.function
        assert back.seed == rec.seed
        assert back.samples == rec.samples
        assert back.final_fitness == rec.final_fitness
        assert np.array_equal(back.final_x, rec.final_x)
        assert record_to_text(back) == text

    def test_rejects_garbage(self):
        with pytest.raises(ConfigurationError):
            record_from_text("not a record\n")


class TestCmdRun:
    def test_produces_records_and_manifest(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        assert cmd_run(cfg) == EXIT_OK
        records = sorted(os.listdir(os.path.join(out, "records")))
        assert len(records) == 2 * 2 * 3  # functions x algorithms x runs
        manifest = open(os.path.join(out, "manifest.txt")).read()
        assert manifest.startswith("# gmde-manifest v1")
        assert manifest.count("\ncell ") + manifest.startswith("cell ") == 12
        for fname in records:
            assert manifest.count(f"records/{fname}") == 1  # referenced exactly once
        assert "12 executed, 0 skipped" in capsys.readouterr().out

    def test_single_function_cell_count(self, tmp_path):
        out = str(tmp_path / "res")
        cfg = small_config(out, functions=("shifted-sphere",))
        assert cmd_run(cfg) == EXIT_OK
        assert len(os.listdir(os.path.join(out, "records"))) == 6  # 1 fn x 2 algos x 3 runs

    def test_idempotent_rerun(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        cmd_run(cfg)
        capsys.readouterr()
        before = {
            f: os.path.getmtime(os.path.join(out, "records", f))
            for f in os.listdir(os.path.join(out, "records"))
        }
        assert cmd_run(cfg) == EXIT_OK
        assert "0 executed, 12 skipped" in capsys.readouterr().out
        after = {
            f: os.path.getmtime(os.path.join(out, "records", f))
            for f in os.listdir(os.path.join(out, "records"))
        }
        assert before == after

    def test_force_recomputes_identically(self, tmp_path):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        cmd_run(cfg)
        rec_dir = os.path.join(out, "records")
        before = {f: open(os.path.join(rec_dir, f)).read() for f in os.listdir(rec_dir)}
        cmd_run(cfg, force=True)
        after = {f: open(os.path.join(rec_dir, f)).read() for f in os.listdir(rec_dir)}
        assert before == after

    def test_parallel_jobs_identical(self, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        cmd_run(small_config(out1), jobs=1)
        cmd_run(small_config(out2), jobs=2)
        recs1 = sorted(os.listdir(os.path.join(out1, "records")))
        recs2 = sorted(os.listdir(os.path.join(out2, "records")))
        assert recs1 == recs2
        for f in recs1:
            assert (
                open(os.path.join(out1, "records", f)).read()
                == open(os.path.join(out2, "records", f)).read()
            )


class TestCmdCompare:
    def run_and_compare(self, tmp_path, **kw):
        out = str(tmp_path / "res")
        cfg = small_config(out, **kw)
        cmd_run(cfg)
        code = cmd_compare(cfg, "gmde", ["GMDE#1"])
        return cfg, out, code

    def test_reports_written(self, tmp_path):
        cfg, out, code = self.run_and_compare(tmp_path, report_mode="both")
        assert code == EXIT_OK
        reports = os.path.join(out, "reports")
        rows = open(os.path.join(reports, "wlt_rows.tsv")).read().splitlines()
        assert rows[0].startswith("function\t")
        assert len(rows) == 1 + 2  # header + one row per function
        assert os.path.exists(os.path.join(reports, "wlt_table.txt"))
        assert os.path.exists(os.path.join(reports, "means_rows.tsv"))
        conv = open(os.path.join(reports, "convergence.csv")).read().splitlines()
        assert conv[0] == "function,algorithm,run,generation,used_fes,best_fitness"
        assert len(conv) > 10

    def test_candidate_vs_itself_all_ties(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        cmd_run(cfg)
        assert cmd_compare(cfg, "GMDE#1", ["GMDE#1"]) == EXIT_OK
        rows = open(os.path.join(out, "reports", "wlt_rows.tsv")).read().splitlines()[1:]
        assert all(row.split("\t")[-1] == "t" and row.split("\t")[3] == "0" for row in rows)

    def test_missing_cells_exit_2(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        cmd_run(cfg)
        os.remove(
            os.path.join(out, "records", os.listdir(os.path.join(out, "records"))[0])
        )
        assert cmd_compare(cfg, "gmde", ["GMDE#1"]) == EXIT_PARTIAL
        assert "missing result cells" in capsys.readouterr().err


class TestPipelineDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        outs = []
        for sub in ("p1", "p2"):
            out = str(tmp_path / sub)
            cfg = small_config(out, report_mode="both")
            assert cmd_run(cfg, jobs=2) == EXIT_OK
            assert cmd_compare(cfg, "gmde", ["GMDE#1"]) == EXIT_OK
            outs.append(out)
        for name in ("wlt_rows.tsv", "wlt_table.txt", "means_rows.tsv", "convergence.csv"):
            a = open(os.path.join(outs[0], "reports", name)).read()
            b = open(os.path.join(outs[1], "reports", name)).read()
            assert a == b, name
        recs = sorted(os.listdir(os.path.join(outs[0], "records")))
        for f in recs:
            a = open(os.path.join(outs[0], "records", f)).read()
            b = open(os.path.join(outs[1], "records", f)).read()
            assert a == b


class TestCmdSweep:
    def test_enumerates_family_and_honors_budget(self, tmp_path):
        out = str(tmp_path / "sweep")
        cfg = small_config(out, functions=("shifted-sphere",), runs=1)
        assert cmd_sweep(1, cfg, jobs=2) == EXIT_OK
        rec_dir = os.path.join(out, "records")
        names = os.listdir(rec_dir)
        assert len(names) == 27  # one strategy family member per record
        for f in names:
            rec = read_record(os.path.join(rec_dir, f))
            assert rec.d == 10
            assert rec.max_fes == 10_000
            assert rec.samples[-1][1] <= 10_000
            assert rec.control.startswith("fixed(f=0.5")
        ranking = open(os.path.join(out, "reports", "sweep_ranking.txt")).read()
        means = open(os.path.join(out, "reports", "sweep_means.tsv")).read().splitlines()
        assert len(means) == 1 + 27
        assert "strategies by number of functions where best" in ranking


class TestShippedConfigs:
    CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

    def test_full_scale_config_accepted(self):
        cfg = ExperimentConfig.from_file(os.path.join(self.CONFIG_DIR, "second-round.cfg"))
        assert cfg.runs == 50 and cfg.dimension == 30 and cfg.max_fes == 300_000
        suite = cfg.suite()
        assert len(suite) >= 10
        cfg.control_mode()
        cfg.pools()

    def test_acceptance_config_matches_pipeline(self):
        cfg = ExperimentConfig.from_file(os.path.join(self.CONFIG_DIR, "desk-acceptance.cfg"))
        assert cfg.runs == 30 and len(cfg.suite()) == 10


class TestWorkerFailures:
    def test_failed_cells_reported_in_manifest(self, tmp_path, capsys, monkeypatch):
        import gmde.cli as cli_mod

        original = cli_mod._execute_cell

        def boom(task):
            objective = task[0]
            if objective.name == "shifted-rastrigin":
                raise RuntimeError("synthetic worker failure")
            return original(task)

        monkeypatch.setattr(cli_mod, "_execute_cell", boom)
        out = str(tmp_path / "res")
        cfg = small_config(out)
        assert cmd_run(cfg) == EXIT_PARTIAL
        manifest = open(os.path.join(out, "manifest.txt")).read()
        assert "failed" in manifest and "synthetic worker failure" in manifest
        assert "6 failed" in capsys.readouterr().out


class TestMainEntry:
    def test_run_and_compare_via_argv(self, tmp_path, capsys):
        out = str(tmp_path / "res")
        cfg = small_config(out)
        cfg_path = str(tmp_path / "exp.cfg")
        cfg.to_file(cfg_path)
        assert main(["run", "--config", cfg_path, "--jobs", "2"]) == EXIT_OK
        assert main(["compare", "--config", cfg_path, "--candidate", "gmde", "--opponents", "GMDE#1"]) == EXIT_OK
        out_text = capsys.readouterr().out
        assert "compare: gmde vs GMDE#1" in out_text

    def test_suite_gen(self, tmp_path, capsys):
        cfg = small_config(str(tmp_path / "res"))
        cfg_path = str(tmp_path / "exp.cfg")
        cfg.to_file(cfg_path)
        assert main(["suite-gen", "--config", cfg_path]) == EXIT_OK
        files = os.listdir(os.path.join(str(tmp_path / "res"), "suite"))
        assert len(files) == 26  # 10 plain + 10 shifted + 6 rotated

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[control]\ncontrol = warp\n")
        assert main(["run", "--config", str(bad)]) == EXIT_CONFIG

    def test_unreadable_config(self):
        assert main(["run", "--config", "/nonexistent.cfg"]) == EXIT_CONFIG
