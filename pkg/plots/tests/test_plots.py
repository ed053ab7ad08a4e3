import os
import shutil

import pytest

from gthermo_plots import (ResultTable, SchemaError, plot_dichotomy, plot_sweep,
                           plot_convergence, load_history)
from gthermo_plots.cli import main

SAMPLES = os.path.join(os.path.dirname(__file__), "..", "sample_results")


def sample(name):
    return os.path.join(SAMPLES, name)


class TestResultTable:
    def test_load_dichotomy_sample(self):
        t = ResultTable.load(sample("dichotomy/results.csv"))
        assert {r["config_id"] for r in t.rows} == {"exact", "product"}

    def test_missing_column_named(self, tmp_path):
        src = open(sample("scan/results.csv")).read().splitlines()
        header = src[0].split(",")
        drop = header.index("e_birk_se")
        corrupted = tmp_path / "results.csv"
        corrupted.write_text("\n".join(
            ",".join(p for i, p in enumerate(line.split(",")) if i != drop)
            for line in src) + "\n")
        t = ResultTable.load(str(corrupted))
        with pytest.raises(SchemaError) as e:
            plot_sweep(t, str(tmp_path / "x.png"))
        assert "e_birk_se" in str(e.value)

    def test_wrong_schema_version(self, tmp_path):
        p = tmp_path / "results.csv"
        p.write_text("schema_version,config_id\n99,exact\n")
        with pytest.raises(SchemaError) as e:
            ResultTable.load(str(p))
        assert "schema_version" in str(e.value)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "results.csv"
        p.write_text("schema_version,a,b\n1,2\n")
        with pytest.raises(SchemaError):
            ResultTable.load(str(p))


class TestFigures:
    def test_dichotomy_figure(self, tmp_path):
        t = ResultTable.load(sample("dichotomy/results.csv"))
        out = plot_dichotomy(t, str(tmp_path / "dichotomy.png"))
        assert os.path.getsize(out) > 1000

    def test_dichotomy_empty_table_error(self, tmp_path):
        p = tmp_path / "results.csv"
        header = open(sample("dichotomy/results.csv")).readline()
        p.write_text(header)
        t = ResultTable.load(str(p))
        with pytest.raises(SchemaError) as e:
            plot_dichotomy(t, str(tmp_path / "x.png"))
        assert "exact" in str(e.value) and "product" in str(e.value)

    def test_dichotomy_partial_single_config(self, tmp_path):
        lines = open(sample("dichotomy/results.csv")).read().splitlines()
        keep = [lines[0]] + [l for l in lines[1:] if l.startswith("1,exact")]
        p = tmp_path / "results.csv"
        p.write_text("\n".join(keep) + "\n")
        t = ResultTable.load(str(p))
        out = plot_dichotomy(t, str(tmp_path / "partial.png"))
        assert os.path.getsize(out) > 1000   # degraded figure, with warning text

    def test_sweep_figure(self, tmp_path):
        t = ResultTable.load(sample("scan/results.csv"))
        out = plot_sweep(t, str(tmp_path / "sweep.png"))
        assert os.path.getsize(out) > 1000

    def test_convergence_figure(self, tmp_path):
        out = plot_convergence([sample("lyapunov/history_lyapunov.csv")],
                               str(tmp_path / "conv.png"))
        assert os.path.getsize(out) > 1000

    def test_history_schema_error(self, tmp_path):
        p = tmp_path / "history_x.csv"
        p.write_text("t,lam1,lam2\n1.0,0.5,0.1\n")
        with pytest.raises(SchemaError) as e:
            load_history(str(p))
        assert "lam3" in str(e.value)

    def test_bit_stable_regeneration(self, tmp_path):
        t = ResultTable.load(sample("dichotomy/results.csv"))
        a = plot_dichotomy(t, str(tmp_path / "a.png"))
        b = plot_dichotomy(t, str(tmp_path / "b.png"))
        assert open(a, "rb").read() == open(b, "rb").read()


class TestCli:
    def test_render_dichotomy_dir(self, tmp_path):
        rc = main([sample("dichotomy"), "--out", str(tmp_path / "figs")])
        assert rc == 0
        assert os.path.exists(tmp_path / "figs" / "dichotomy.png")

    def test_render_scan_dir(self, tmp_path):
        rc = main([sample("scan"), "--out", str(tmp_path / "figs")])
        assert rc == 0
        assert os.path.exists(tmp_path / "figs" / "sweep.png")

    def test_render_lyapunov_dir(self, tmp_path):
        rc = main([sample("lyapunov"), "--out", str(tmp_path / "figs")])
        assert rc == 0
        assert os.path.exists(tmp_path / "figs" / "convergence.png")

    def test_corrupted_csv_exit_2(self, tmp_path, capsys):
        d = tmp_path / "bad"
        shutil.copytree(sample("scan"), d)
        lines = open(d / "results.csv").read().splitlines()
        header = lines[0].replace("e_birk_se", "renamed")
        (d / "results.csv").write_text("\n".join([header] + lines[1:]) + "\n")
        rc = main([str(d), "--out", str(tmp_path / "figs")])
        assert rc == 2
        assert "e_birk_se" in capsys.readouterr().err

    def test_empty_dir_error(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        rc = main([str(d), "--out", str(tmp_path / "figs")])
        assert rc == 2
