import json
import math

import numpy as np
import pytest

from ordclass.cli import main
from ordclass.datasets import GALAXY, SMALL10
from ordclass.report import RunConfig, emit_plot_data, ingest, run


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestIngest:
    def test_bundled(self):
        assert ingest("small10").values.tolist() == list(SMALL10)
        assert ingest("galaxy").n == 82

    def test_text_file(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("3.0\n\n# comment\n1.5\n-2\n")
        assert ingest(str(p)).values.tolist() == [-2.0, 1.5, 3.0]

    def test_parse_error_line(self, tmp_path, capsys):
        p = tmp_path / "d.txt"
        p.write_text("1.0\n2.0\nabc\n")
        code, _, err = run_cli(capsys, "exact", "--data", str(p))
        assert code == 2
        assert "parse error at line 3" in err

    def test_empty(self, tmp_path, capsys):
        p = tmp_path / "d.txt"
        p.write_text("\n\n")
        code, _, err = run_cli(capsys, "exact", "--data", str(p))
        assert code == 2 and "no observations" in err

    def test_csv_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("id,v\n1,0.5\n2,-1\n3,2\n")
        assert ingest(str(p), column="v").values.tolist() == [-1.0, 0.5, 2.0]

    def test_csv_bad_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("id,v\n1,0.5\n2,x\n")
        with pytest.raises(ValueError, match="parse error at line 3"):
            ingest(str(p), column="v")

    def test_scale(self):
        ds = ingest("galaxy", scale=1000.0)
        assert ds.values[0] == pytest.approx(9172.0)

    def test_missing_file(self, capsys):
        code, _, err = run_cli(capsys, "exact", "--data", "/nonexistent/file.txt")
        assert code == 2 and "cannot read" in err


class TestCommands:
    def test_exact_table(self, capsys):
        code, out, _ = run_cli(capsys, "exact", "--data", "small10")
        assert code == 0
        assert "0.88623" in out
        assert "[4, 6]" in out

    def test_exact_json(self, capsys):
        code, out, _ = run_cli(capsys, "exact", "--data", "small10", "--format", "json")
        rep = json.loads(out)
        assert rep["schema_version"] == "1.0"
        res = rep["results"]["exact"]
        assert res["k_prob_sum"] == pytest.approx(1.0, abs=1e-9)
        assert res["top"][0]["composition"] == [4, 6]
        assert rep["dataset"]["n"] == 10 and rep["dataset"]["min"] == -1.522

    def test_exact_infeasible(self, capsys):
        code, _, err = run_cli(capsys, "exact", "--data", "galaxy")
        assert code == 3
        assert "use MCMC" in err

    def test_ward(self, capsys):
        code, out, _ = run_cli(capsys, "ward", "--data", "small10", "--k", "2", "--format", "json")
        res = json.loads(out)["results"]["ward"]
        assert res["sizes"] == [4, 6]
        assert res["composition"] == [4, 6]
        assert res["clusters"][0] == [1, 2, 3, 4]

    def test_ward_bad_k(self, capsys):
        code, _, _ = run_cli(capsys, "ward", "--data", "small10", "--k", "11")
        assert code == 2

    def test_mcmc_reproducible(self, capsys):
        args = ("mcmc", "--data", "small10", "--iters", "2000", "--burnin", "100", "--seed", "5",
                "--format", "json", "--no-timing")
        _, a, _ = run_cli(capsys, *args)
        _, b, _ = run_cli(capsys, *args)
        assert a == b
        rep = json.loads(a)
        assert "timing" not in rep
        res = rep["results"]["mcmc-m1"]
        assert res["k_prob_sum"] == pytest.approx(1.0, abs=1e-12)
        assert res["samples"] == 2000

    def test_timing_isolated(self, capsys):
        args = ("mcmc", "--scheme", "m2", "--data", "small10", "--iters", "500", "--format", "json")
        _, a, _ = run_cli(capsys, *args)
        _, b, _ = run_cli(capsys, *args)
        ra, rb = json.loads(a), json.loads(b)
        assert "mcmc-m2" in ra["timing"]
        ra.pop("timing"), rb.pop("timing")
        assert ra == rb

    def test_mcmc_zero_iterations(self, capsys):
        code, _, err = run_cli(capsys, "mcmc", "--data", "small10", "--iters", "0")
        assert code == 2 and "no samples collected" in err

    def test_bad_hyperparameter(self, capsys):
        code, _, err = run_cli(capsys, "exact", "--data", "small10", "--c", "-1")
        assert code == 2 and "c must be" in err

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["exact"])
        assert exc.value.code == 2

    def test_invariant_exit_code(self, capsys, monkeypatch):
        from ordclass import mcmc

        monkeypatch.setenv("CLASSIFY_DEBUG", "1")
        real = mcmc.log_unnorm_prob
        monkeypatch.setattr(mcmc, "log_unnorm_prob", lambda c, d, h: real(c, d, h) - 2.0)
        code, _, err = run_cli(capsys, "mcmc", "--data", "small10", "--iters", "1000", "--burnin", "0")
        assert code == 4 and "internal check failed" in err

    def test_compare_csv(self, capsys):
        code, out, _ = run_cli(capsys, "compare", "--data", "small10", "--methods", "exact,mcmc-m1,ward",
                               "--iters", "1000", "--format", "csv")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "k,exact,mcmc-m1"
        assert len([ln for ln in lines if ln[:1].isdigit()]) >= 10
        assert "cluster,members" in lines

    def test_compare_unknown_method(self, capsys):
        code, _, err = run_cli(capsys, "compare", "--data", "small10", "--methods", "exact,bogus")
        assert code == 2 and "unknown method" in err

    def test_output_file(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, stdout, _ = run_cli(capsys, "exact", "--data", "small10", "--format", "json", "-o", str(out))
        assert code == 0 and stdout == ""
        assert json.loads(out.read_text())["results"]["exact"]["n_configurations"] == 512

    def test_json_roundtrip_full_precision(self, capsys):
        _, out, _ = run_cli(capsys, "exact", "--data", "small10", "--format", "json")
        rep = json.loads(out)
        direct = run(RunConfig(data="small10"))
        assert rep["results"]["exact"]["k_probs"] == direct["results"]["exact"]["k_probs"]


class TestPlotData:
    def test_histogram_binning(self, capsys):
        code, out, _ = run_cli(capsys, "exact", "--data", "small10", "--plot", "histogram")
        assert code == 0
        rows = [ln.split(",") for ln in out.splitlines()[1:]]
        edges = [float(r[0]) for r in rows] + [float(rows[-1][1])]
        counts = [int(r[2]) for r in rows]
        # direct binning: half-open bins, last bin closed
        oracle = [0] * len(counts)
        for y in SMALL10:
            j = next(i for i in range(len(counts)) if y < edges[i + 1] or i == len(counts) - 1)
            oracle[j] += 1
        assert counts == oracle
        assert sum(counts) == 10
        below = sum(c for c, right in zip(counts, edges[1:]) if right <= 1.0)
        assert below == 4
        assert 0 in counts[1:-1]  # the two modes are separated by an empty bin

    def test_k_bar(self, capsys):
        _, out, _ = run_cli(capsys, "exact", "--data", "small10", "--plot", "k-bar", "--format", "json")
        rows = json.loads(out)["rows"]
        assert [r["k"] for r in rows] == list(range(1, 11))
        assert rows[1]["prob"] == pytest.approx(0.88622, abs=5e-5)

    def test_dendrogram(self, capsys):
        _, out, _ = run_cli(capsys, "ward", "--data", "small10", "--plot", "dendrogram")
        lines = out.splitlines()
        assert lines[0] == "step,left,right,cost,size"
        assert len(lines) == 10

    def test_dendrogram_missing(self, capsys):
        code, _, err = run_cli(capsys, "exact", "--data", "small10", "--plot", "dendrogram")
        assert code == 2 and "does not provide this plot" in err

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            emit_plot_data(run(RunConfig(data="small10")), "pie")


def test_bundled_galaxy_units():
    assert len(GALAXY) == 82
    assert min(GALAXY) == 9.172 and max(GALAXY) == 34.279
    assert np.all(np.diff(GALAXY) >= 0)
