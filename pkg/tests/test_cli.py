"""End-to-end CLI pipeline tests (run in-process through main())."""

import json

import numpy as np
import pytest

from sketchprec.cli import main
from sketchprec.symmat import load_spmx, save_matrix_csv


def run_cli(*argv):
    return main(list(argv))


class TestGen:
    def test_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "gt"
        assert run_cli("gen", "--kind", "erdos", "--d", "16", "--blocks", "4",
                       "--seed", "1", "-o", str(out)) == 0
        assert (out / "theta.spmx").exists()
        assert (out / "sigma.spmx").exists()
        meta = json.loads((out / "meta.json").read_text())
        assert meta["d"] == 16 and meta["kind"] == "erdos"

    def test_usage_error_exit_code(self, capsys):
        assert run_cli("gen", "--kind", "erdos") == 1

    def test_bad_kind(self, capsys):
        assert run_cli("gen", "--kind", "ladder", "--d", "8", "--blocks", "2", "-o", "x") == 1


class TestPipeline:
    def test_gen_sketch_decode_eval(self, tmp_path, capsys):
        gt_dir = tmp_path / "gt"
        assert run_cli("gen", "--kind", "erdos", "--d", "16", "--blocks", "4",
                       "--seed", "3", "-o", str(gt_dir)) == 0

        rng = np.random.default_rng(0)
        sigma = load_spmx(gt_dir / "sigma.spmx")
        w, v = np.linalg.eigh(sigma)
        data = (rng.standard_normal((400, 16)) * np.sqrt(w)) @ v.T
        data_csv = tmp_path / "x.csv"
        np.savetxt(data_csv, data, delimiter=",")

        skch = tmp_path / "s.skch"
        assert run_cli("sketch", "--op", "structured", "--m", "128", "--seed", "2",
                       "--data", str(data_csv), "-o", str(skch)) == 0

        est_dir = tmp_path / "est"
        assert run_cli("decode", "--sketch", str(skch), "--lambda", "0.05",
                       "--gamma", "stable", "--tmax", "40", "-o", str(est_dir)) == 0
        assert (est_dir / "theta.spmx").exists()
        meta = json.loads((est_dir / "meta.json").read_text())
        assert meta["t_max"] == 40 and meta["sketch"]["m"] == 128

        capsys.readouterr()  # drop accumulated pipeline output
        assert run_cli("eval", "--true", str(gt_dir / "theta.spmx"),
                       "--est", str(est_dir / "theta.spmx")) == 0
        payload = json.loads(capsys.readouterr().out)
        assert np.isfinite(payload["re"]) and 0.0 <= payload["f1"] <= 1.0

    def test_eval_json_output(self, tmp_path, capsys):
        a = np.diag([1.0, 2.0, 3.0])
        pa = tmp_path / "a.csv"
        save_matrix_csv(pa, a)
        assert run_cli("eval", "--true", str(pa), "--est", str(pa)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["re"] == 0.0 and payload["f1"] == 1.0

    def test_decode_numeric_gamma(self, tmp_path):
        rng = np.random.default_rng(1)
        data_csv = tmp_path / "x.csv"
        np.savetxt(data_csv, rng.standard_normal((50, 8)), delimiter=",")
        skch = tmp_path / "s.skch"
        assert run_cli("sketch", "--op", "dense", "--m", "24", "--seed", "5",
                       "--data", str(data_csv), "-o", str(skch)) == 0
        est = tmp_path / "est"
        assert run_cli("decode", "--sketch", str(skch), "--lambda", "0.01",
                       "--gamma", "0.01", "--tmax", "10", "--trace", "-o", str(est)) == 0
        meta = json.loads((est / "meta.json").read_text())
        assert len(meta["objective_trace"]) == 10

    def test_sketch_missing_file_is_data_error(self, tmp_path):
        assert run_cli("sketch", "--op", "dense", "--m", "8", "--seed", "1",
                       "--data", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "s.skch")) == 2

    def test_sketch_stdin(self, tmp_path, monkeypatch):
        import io
        monkeypatch.setattr("sys.stdin", io.StringIO("1.0,0.0\n0.0,1.0\n1.0,1.0\n"))
        skch = tmp_path / "s.skch"
        assert run_cli("sketch", "--op", "dense", "--m", "4", "--seed", "1",
                       "--data", "-", "--d", "2", "-o", str(skch)) == 0
        from sketchprec.sketch import load_skch
        assert load_skch(skch).n == 3

    def test_sketch_stdin_requires_d(self, tmp_path):
        assert run_cli("sketch", "--op", "dense", "--m", "4", "--seed", "1",
                       "--data", "-", "-o", str(tmp_path / "s.skch")) == 2


class TestBench:
    def test_bench_smoke(self, tmp_path):
        cfg = {
            "generator": {"kind": "erdos", "d": 8, "blocks": 2, "p": 0.2, "seed": 0},
            "n": "infinite",
            "m_grid": [16],
            "lambda_grid": [0.01, 0.1],
            "gamma": "stable",
            "t_max": 15,
            "repeats": 1,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_csv = tmp_path / "results.csv"
        assert run_cli("bench", "--config", str(cfg_path), "-o", str(out_csv)) == 0
        text = out_csv.read_text()
        assert text.startswith("# sketchprec-results v1\n")
        # 2 cells + best-lambda summaries
        assert len(text.strip().splitlines()) >= 4

    def test_bench_rejects_unknown_key(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"generator": {"kind": "erdos", "d": 8, "blocks": 2},
                                        "n": 1, "m_grid": [8], "lambda_grid": [0.1],
                                        "mystery": True}))
        assert run_cli("bench", "--config", str(cfg_path), "-o", str(tmp_path / "r.csv")) == 2


class TestRipProbeCli:
    def test_stdout_table(self, capsys):
        assert run_cli("ripprobe", "--d", "8", "--k", "8", "--m-grid", "16,64",
                       "--pairs", "3", "--mc", "2000", "--seed", "1") == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0] == "m,n_pairs,median,q10,q90,max"
        assert len(lines) == 3
