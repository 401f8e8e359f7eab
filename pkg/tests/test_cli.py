import json
import os

import numpy as np
import pytest

from maplab.cli import dispatch
from maplab.fixtures import fixture_names, two_state
from maplab.io import map_spec_to_dict


def run(argv):
    return dispatch(argv)


class TestDispatch:
    def test_fixtures_list(self, capsys):
        assert run(["fixtures", "list"]) == 0
        out = capsys.readouterr().out.split()
        assert out == fixture_names()

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 2

    def test_unknown_flag(self):
        assert run(["fixtures", "list", "--bogus"]) == 2

    def test_unknown_fixture(self, capsys):
        code = run(["analyze", "--fixture", "nope"])
        assert code == 2
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"] == "usage"

    def test_missing_spec_file(self):
        assert run(["analyze", "--spec", "/nonexistent.json"]) == 2

    def test_seed_required(self):
        assert run(["verify-clt", "--fixture", "two_state",
                    "--n-list", "16", "--paths", "100"]) == 2


class TestReports:
    def test_verify_clt_report(self, tmp_path):
        out = tmp_path / "r.json"
        code = run(["verify-clt", "--fixture", "two_state",
                    "--n-list", "64,256", "--paths", "20000", "--seed", "7",
                    "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "pass"
        assert doc["spec_hash"]
        assert doc["config"]["seed"] == 7
        assert len(doc["records"]) == 2

    def test_byte_identical_across_thread_counts(self, tmp_path):
        argv = ["verify-be", "--fixture", "iid_rademacher",
                "--n-list", "64,256", "--paths", "5000", "--seed", "3"]
        o1, o2 = tmp_path / "a.json", tmp_path / "b.json"
        assert run(argv + ["--out", str(o1), "--threads", "1"]) == 0
        os.environ["MAPLAB_THREADS"] = "8"
        try:
            assert run(argv + ["--out", str(o2)]) == 0
        finally:
            del os.environ["MAPLAB_THREADS"]
        assert o1.read_bytes() == o2.read_bytes()

    def test_spec_file_input(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(map_spec_to_dict(two_state())))
        out = tmp_path / "r.json"
        code = run(["analyze", "--spec", str(spec_path), "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["sigma2"] == pytest.approx(0.72, abs=1e-5)

    def test_scan_lambda_csv(self, tmp_path):
        out = tmp_path / "scan.csv"
        assert run(["scan-lambda", "--fixture", "two_state",
                    "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("zeta,")
        assert len(lines) > 10

    def test_simulate_binary_output(self, tmp_path):
        out = tmp_path / "y.bin"
        assert run(["simulate", "--fixture", "two_state", "--n", "32",
                    "--paths", "50", "--seed", "5", "--out", str(out)]) == 0
        vals = np.frombuffer(out.read_bytes(), dtype="<f8")
        assert len(vals) == 50
        meta = json.loads((tmp_path / "y.bin.json").read_text())
        assert meta["spec_hash"]

    def test_mixing_bound_kernel_only(self, tmp_path):
        out = tmp_path / "mix.json"
        code = run(["mixing-bound", "--fixture", "two_state", "--lags",
                    "1,2,3", "--paths", "5000", "--seed", "2",
                    "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "pass"

    def test_nonlattice_scan_verdicts(self, tmp_path):
        assert run(["nonlattice-scan", "--fixture", "gaussian_iid",
                    "--out", str(tmp_path / "g.json")]) == 0
        # the lattice fixture stays below radius 1 on a generic grid but is
        # caught at the exact lattice frequency
        code = run(["nonlattice-scan", "--fixture", "lattice_pm1",
                    "--k-min", str(np.pi), "--k-max", str(2 * np.pi),
                    "--k-points", "2", "--out", str(tmp_path / "l.json")])
        assert code == 1

    def test_verify_ct(self, tmp_path):
        out = tmp_path / "ct.json"
        code = run(["verify-ct", "--fixture", "ct_two_state",
                    "--t-list", "64,256", "--paths", "20000", "--seed", "11",
                    "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["fractional_part_negligible"] is True

    def test_verify_edgeworth_allow_lattice(self, tmp_path):
        code = run(["verify-edgeworth", "--fixture", "two_state",
                    "--n-list", "64", "--paths", "5000", "--seed", "1",
                    "--out", str(tmp_path / "e.json")])
        assert code == 2       # lattice fixture rejected without the flag
        code = run(["verify-edgeworth", "--fixture", "two_state",
                    "--n-list", "64", "--paths", "5000", "--seed", "1",
                    "--allow-lattice", "--out", str(tmp_path / "e2.json")])
        assert code in (0, 1)

    def test_mestimate(self, tmp_path):
        out = tmp_path / "m.json"
        code = run(["mestimate", "--fixture", "mean_contrast_problem",
                    "--n-list", "64,256", "--reps", "5000", "--seed", "17",
                    "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["verdict"] == "pass"
        assert doc["d_ball"] == pytest.approx(0.25)

    def test_mestimate_problem_file(self, tmp_path):
        from maplab.fixtures import mean_contrast_kernel
        from maplab.io import kernel_to_dict
        doc = {
            "family": "mean_contrast",
            "xi": [[0.0, 1.0], [0.0, 1.0]],
            "kernels": {"1.0": kernel_to_dict(mean_contrast_kernel(1.0))},
        }
        p = tmp_path / "prob.json"
        p.write_text(json.dumps(doc))
        code = run(["mestimate", "--problem", str(p), "--n-list", "64",
                    "--reps", "2000", "--seed", "5",
                    "--out", str(tmp_path / "m.json")])
        assert code == 0
