import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from gne import synth
from gne.cli import main

SCHEMA = json.loads(resources.files("gne").joinpath("schemas/run_report.schema.json").read_text())


def _synth(tmp_path, preset, seed=0):
    out = tmp_path / f"{preset}-{seed}"
    assert main(["synth", "--preset", preset, "--seed", str(seed), "--outdir", str(out)]) == 0
    return out


def _inputs(d):
    return ["--edges", str(d / "edges.txt"), "--labels", str(d / "labels.tsv")]


def _report(d):
    rep = json.loads((d / "report.json").read_text())
    jsonschema.validate(rep, SCHEMA)
    return rep


@pytest.fixture(scope="module")
def xophily(tmp_path_factory):
    return _synth(tmp_path_factory.mktemp("x"), "xophily", 0)


class TestUsage:
    def test_missing_labels(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["classify", "--edges", str(tmp_path / "e.txt")])
        assert exc.value.code == 2

    @pytest.mark.parametrize("frac", ["2.0", "0", "-0.1", "abc"])
    def test_bad_prior_frac(self, tmp_path, frac):
        with pytest.raises(SystemExit) as exc:
            main(["test", "--edges", "e", "--labels", "l", "--prior-frac", frac])
        assert exc.value.code == 2

    def test_synth_needs_source(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth"])
        assert exc.value.code == 2

    def test_bad_env_seed(self, monkeypatch, tmp_path):
        monkeypatch.setenv("NETEFFECT_SEED", "x")
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--preset", "bipartite", "--outdir", str(tmp_path)])
        assert exc.value.code == 2

    def test_missing_file_runtime_error(self, tmp_path, capsys):
        code = main(["stats", "--edges", str(tmp_path / "nope.txt"), "--labels", str(tmp_path / "nope.tsv")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_malformed_edges(self, tmp_path):
        (tmp_path / "e.txt").write_text("0 1\nfoo bar\n")
        (tmp_path / "l.tsv").write_text("0\ta\n1\tb\n")
        assert main(["stats", "--edges", str(tmp_path / "e.txt"), "--labels", str(tmp_path / "l.tsv")]) == 1

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "gne", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "classify" in res.stdout


class TestSynthStats:
    def test_deterministic_files(self, tmp_path):
        a = _synth(tmp_path / "a", "xophily", 7)
        b = _synth(tmp_path / "b", "xophily", 7)
        for name in ("edges.txt", "labels.tsv", "spec.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        rep = _report(a)
        assert rep["n"] == 12000 and rep["m"] == 60000 and rep["seed"] == 7

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NETEFFECT_SEED", "3")
        assert main(["synth", "--preset", "bipartite", "--outdir", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "spec.json").read_text())["seed"] == 3
        assert _report(tmp_path)["seed"] == 3

    def test_spec_file(self, tmp_path):
        spec = synth.GeneratorSpec((50, 50), ((0.0, 1.0), (1.0, 0.0)), 300, 0.0, 1)
        (tmp_path / "spec.in.json").write_text(spec.to_json())
        assert main(["synth", "--spec", str(tmp_path / "spec.in.json"), "--outdir", str(tmp_path / "o")]) == 0
        assert len((tmp_path / "o" / "edges.txt").read_text().split("\n")) >= 300

    def test_malformed_spec(self, tmp_path):
        (tmp_path / "s.json").write_text('{"class_sizes": [5]}')
        assert main(["synth", "--spec", str(tmp_path / "s.json"), "--outdir", str(tmp_path)]) == 1

    def test_triangle(self, tmp_path, capsys):
        (tmp_path / "e.txt").write_text("0 1\n1 2\n0 2\n")
        # an isolated fourth node supplies the second class a label set needs
        (tmp_path / "l.tsv").write_text("0\ta\n1\ta\n2\ta\n3\tb\n")
        assert main(["stats", "--edges", str(tmp_path / "e.txt"), "--labels", str(tmp_path / "l.tsv")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["edge_homophily"] == 1.0
        assert (out["n"], out["m"], out["c"]) == (4, 3, 2)

    def test_bipartite(self, tmp_path, capsys):
        d = _synth(tmp_path, "bipartite")
        capsys.readouterr()
        assert main(["stats", *_inputs(d)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["edge_homophily"] == 0.0
        assert out["h_hat"] == 0.0
        assert out["skipped_edges"] == 0

    def test_threads_flag(self, tmp_path, capsys):
        d = _synth(tmp_path, "bipartite")
        capsys.readouterr()
        main(["stats", *_inputs(d)])
        a = capsys.readouterr().out
        main(["stats", *_inputs(d), "--threads", "1"])
        assert capsys.readouterr().out == a


class TestTestCommand:
    def test_no_gne(self, tmp_path, capsys):
        d = _synth(tmp_path, "no-gne")
        out = tmp_path / "run"
        assert main(["test", *_inputs(d), "--rounds", "200", "--outdir", str(out)]) == 0
        assert capsys.readouterr().out.strip().splitlines()[-1] == "none"
        assert json.loads((out / "verdict.json").read_text())["graph_level"] == "none"
        assert _report(out)["verdict"] == "none"
        header = (out / "pvalues.csv").read_text().splitlines()[0].split(",")
        assert len(header) == 7

    def test_xophily_strong(self, xophily, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["test", *_inputs(xophily), "--prior-frac", "0.2", "--rounds", "200", "--outdir", str(out)]) == 0
        assert capsys.readouterr().out.strip() == "strong"

    def test_deterministic_given_seed(self, tmp_path):
        d = _synth(tmp_path, "weak")
        for name in ("a", "b"):
            main(["test", *_inputs(d), "--rounds", "20", "--seed", "5", "--outdir", str(tmp_path / name)])
        assert (tmp_path / "a" / "pvalues.csv").read_text() == (tmp_path / "b" / "pvalues.csv").read_text()


class TestEstimateCommand:
    def _matrix(self, out):
        lines = (out / "compatibility.csv").read_text().splitlines()
        names = lines[0].split(",")[1:]
        return names, np.array([[float(x) for x in r.split(",")[1:]] for r in lines[1:]])

    def test_nef_pattern(self, xophily, tmp_path):
        out = tmp_path / "nef"
        assert main(["estimate", *_inputs(xophily), "--outdir", str(out)]) == 0
        names, h = self._matrix(out)
        np.testing.assert_allclose(h.sum(axis=1), 1.0)
        # label files assign ids in first-seen order, so compare by class name
        found = {names[r]: names[k] for r, k in enumerate(np.argmax(h, axis=1))}
        pattern = synth.block_pattern(synth.preset("xophily"))
        assert found == {f"c{k}": f"c{pattern[k]}" for k in range(6)}
        meta = json.loads((out / "estimate.json").read_text())
        assert meta["estimator"] == "nef" and meta["emphasis"] is True and meta["form"] == "display"
        alphas = _report(out)["ridge_alphas"]
        assert len(alphas) == 6 and len(set(alphas)) == 1

    def test_edge_count(self, xophily, tmp_path):
        out = tmp_path / "ec"
        assert main(["estimate", *_inputs(xophily), "--estimator", "edge-count", "--outdir", str(out)]) == 0
        _, h = self._matrix(out)
        np.testing.assert_allclose(h.sum(axis=1), 1.0)
        assert json.loads((out / "estimate.json").read_text())["estimator"] == "edge-count"

    def test_no_emphasis(self, xophily, tmp_path):
        out = tmp_path / "a"
        assert main(["estimate", *_inputs(xophily), "--no-emphasis", "--outdir", str(out)]) == 0
        assert json.loads((out / "estimate.json").read_text())["emphasis"] is False
        assert "emphasis" not in _report(out)["timings"]


class TestClassifyCommand:
    def _run(self, d, out, mode, frac="0.04"):
        assert main(["classify", *_inputs(d), "--mode", mode, "--prior-frac", frac, "--outdir", str(out)]) == 0
        return _report(out)

    def test_xophily_beats_hom(self, xophily, tmp_path):
        ne = self._run(xophily, tmp_path / "ne", "neteffect")
        hom = self._run(xophily, tmp_path / "hom", "hom")
        assert ne["accuracy"] > hom["accuracy"]
        assert ne["mode"] == "neteffect" and hom["mode"] == "neteffect_hom"
        assert ne["n_eval"] + ne["n_priors"] == 12000
        lines = (tmp_path / "ne" / "predictions.tsv").read_text().splitlines()
        assert len(lines) == 12000
        assert lines[0].split("\t")[0] == "0"

    @pytest.mark.slow
    def test_homophily_modes_agree(self, tmp_path):
        d = _synth(tmp_path, "homophily")
        ne = self._run(d, tmp_path / "ne", "neteffect", "0.05")
        hom = self._run(d, tmp_path / "hom", "hom", "0.05")
        assert abs(ne["accuracy"] - hom["accuracy"]) <= 0.02

    def test_other_modes(self, tmp_path):
        d = _synth(tmp_path, "bipartite")
        for mode in ("ec", "a"):
            rep = self._run(d, tmp_path / mode, mode, "0.1")
            assert rep["accuracy"] > 0.9
            assert rep["h_scale"] > 0
