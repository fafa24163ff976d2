import json

import numpy as np
import pytest

from icmse.cli import main
from icmse.designer import testfn_xi_1d as xi_1d
from icmse.gpmodel import Observation, write_observations_csv


def run_cli(args):
    return main(args)


class TestSimulate:
    def test_deterministic_csv(self, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        argv = ["simulate", "--problem", "1d-single", "--method", "icmse",
                "--n-ini", "4", "--n-seq", "2", "--reps", "2", "--seed", "7",
                "--restarts", "3", "--fit-restarts", "2", "--quiet"]
        assert run_cli(argv + ["--out", str(out1)]) == 0
        assert run_cli(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_csv_schema_and_rows(self, tmp_path):
        out = tmp_path / "r.csv"
        rc = run_cli(["simulate", "--problem", "1d-single", "--method", "icmse",
                      "--method", "seq-maxpro", "--n-ini", "4", "--n-seq", "1",
                      "--reps", "1", "--seed", "3", "--restarts", "3",
                      "--fit-restarts", "2", "--quiet", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "method,replication,step,rmse,mis,censored_count,seconds"
        assert len(lines) == 1 + 2 * 2  # two methods x (step0 + 1 step)
        assert all(line.split(",")[6] == "0.0" for line in lines[1:])

    def test_unknown_method_exits_2(self, tmp_path):
        rc = run_cli(["simulate", "--problem", "1d-single", "--method", "nope",
                      "--n-ini", "4", "--n-seq", "1", "--out", str(tmp_path / "x.csv")])
        assert rc == 2


class TestFitPropose:
    def test_pipeline(self, tmp_path):
        rng = np.random.default_rng(0)
        xs = np.linspace(0.05, 0.95, 7)
        obs = []
        for x in xs:
            v = float(xi_1d(x) + 0.05 * rng.standard_normal())
            obs.append(Observation(x=[x], value=min(v, 0.55), censored=v >= 0.55))
        csv_path = tmp_path / "obs.csv"
        write_observations_csv(csv_path, obs)
        model_path = tmp_path / "m.json"
        rc = run_cli(["fit", "--data", str(csv_path), "--censor-limit", "0.55",
                      "--restarts", "4", "--seed", "1", "--out", str(model_path)])
        assert rc == 0
        doc = json.loads(model_path.read_text())
        assert doc["censor_limit"] == 0.55
        assert len(doc["observations"]) == 7

        rc = run_cli(["propose", "--model", str(model_path), "--restarts", "4",
                      "--seed", "2"])
        assert rc == 0

    def test_missing_file_exits_2(self, tmp_path):
        rc = run_cli(["fit", "--data", str(tmp_path / "none.csv"),
                      "--out", str(tmp_path / "m.json")])
        assert rc == 2

    def test_usage_error_exits_2(self):
        assert run_cli(["simulate", "--bogus"]) == 2
