import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from lanemanifold import __version__
from lanemanifold.cli import fixture_path, main
from lanemanifold.lanes import Lane, LaneSet


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _write(path, lanes):
    path.write_text(json.dumps(lanes.to_dict()))
    return str(path)


def _random_pair(tmp_path, seed=0, q=15):
    rng = np.random.default_rng(seed)
    y = np.linspace(2.0, 80.0, q)
    gt = np.column_stack([rng.normal(0, 1, q), y, rng.normal(0, 0.3, q)])
    pred = gt + np.column_stack([rng.normal(0, 0.7, q), np.zeros(q), rng.normal(0, 0.3, q)])
    return (_write(tmp_path / "pred.json", LaneSet(y, [Lane(1, pred)])),
            _write(tmp_path / "gt.json", LaneSet(y, [Lane(1, gt)])))


class TestDescriptor:
    def test_stdout_json(self, capsys):
        code, out, _ = _run(capsys, "descriptor", "--input", "fixture:lanes_four.json")
        assert code == 0
        doc = json.loads(out)
        assert doc["command"] == "descriptor"
        assert len(doc["descriptor"]) == 256
        assert doc["weights"] == {"source": "seed", "seed": 0}
        assert doc["diagnostics"]["karcher_converged"] is True

    def test_weights_written_and_reused(self, tmp_path, capsys):
        out = tmp_path / "h.json"
        assert main(["descriptor", "--input", "fixture:lanes_four.json", "--seed", "4",
                     "--out", str(out)]) == 0
        wpath = tmp_path / "h.weights.json"
        assert wpath.exists()
        again = tmp_path / "again.json"
        assert main(["descriptor", "--input", "fixture:lanes_four.json", "--seed", "4",
                     "--weights", str(wpath), "--out", str(again)]) == 0
        a, b = json.loads(out.read_text()), json.loads(again.read_text())
        assert a["descriptor"] == b["descriptor"]
        assert b["weights"]["source"] == "file"
        assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]

    def test_overrides_are_echoed(self, capsys):
        code, out, _ = _run(capsys, "descriptor", "--input", "fixture:lanes_four.json",
                            "--clusters", "8", "--d-h", "32", "--ridge", "1e-5")
        config = json.loads(out)["config"]
        assert code == 0 and (config["n_clusters"], config["d_h"], config["ridge"]) == (8, 32, 1e-5)

    def test_single_lane_degenerate_input(self, capsys):
        code, out, _ = _run(capsys, "descriptor", "--input", "fixture:lanes_single_straight.json")
        assert code == 0
        assert np.all(np.isfinite(json.loads(out)["descriptor"]))

    def test_csv(self, capsys):
        code, out, _ = _run(capsys, "descriptor", "--input", "fixture:lanes_four.json",
                            "--d-h", "8", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 8 and set(rows[0]) == {"index", "value"}

    def test_numerical_failure(self, capsys):
        code, _, err = _run(capsys, "descriptor", "--input", "fixture:lanes_four.json",
                            "--karcher-max-iter", "0")
        record = json.loads(err)
        assert code == 3 and record["error"] == "NotConvergedError"
        assert record["best_gradient_norm"] > 0

    def test_empty_lane_set(self, tmp_path, capsys):
        path = _write(tmp_path / "empty.json", LaneSet(np.arange(3.0), []))
        assert _run(capsys, "descriptor", "--input", path)[0] == 4


class TestLossAndEval:
    def test_identical(self, capsys):
        code, out, _ = _run(capsys, "loss", "--input", "fixture:lanes_four.json",
                            "--gt", "fixture:lanes_four.json")
        assert code == 0 and json.loads(out)["records"][0]["total"] <= 1e-11
        code, out, _ = _run(capsys, "eval", "--input", "fixture:lanes_four.json",
                            "--gt", "fixture:lanes_four.json")
        assert code == 0 and json.loads(out)["result"]["f1"] == 1.0

    def test_radius_sweep(self, capsys):
        code, out, _ = _run(capsys, "loss", "--input", "fixture:offset/pred.json",
                            "--gt", "fixture:offset/gt.json", "--r-tube", "0.5,1.0,1.5,2.0,2.5")
        records = json.loads(out)["records"]
        assert code == 0 and [r["r_tube"] for r in records] == [0.5, 1.0, 1.5, 2.0, 2.5]
        assert records[2]["tliou"] == pytest.approx(0.5, abs=1e-12)

    def test_default_flags_echoed(self, capsys):
        _, out, _ = _run(capsys, "loss", "--input", "fixture:offset/pred.json",
                         "--gt", "fixture:offset/gt.json")
        assert json.loads(out)["flags"] == {"lambda_cls": 1.0, "lambda_reg": 1.0,
                                            "lambda_tliou": 0.5, "lambda_sim": 0.4,
                                            "r_tube": [1.5]}

    def test_eval_empty_still_reports(self, tmp_path, capsys):
        path = _write(tmp_path / "empty.json", LaneSet(np.linspace(3, 100, 20), []))
        code, out, _ = _run(capsys, "eval", "--input", path, "--gt", "fixture:lanes_four.json")
        assert code == 4
        assert json.loads(out)["result"]["fn"] == 4

    def test_bad_radius(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["loss", "--input", "a", "--gt", "b", "--r-tube", "0,-1"])
        assert info.value.code == 2


class TestValidateRoad:
    def _args(self, name, limits="limits.json"):
        return ["validate-road", "--surface", f"fixture:{name}/surface.json",
                "--lanes", f"fixture:{name}/lanes.json", "--limits", f"fixture:{name}/{limits}"]

    def test_flat_plane(self, capsys):
        code, out, _ = _run(capsys, *self._args("flat_plane"))
        assert code == 0 and json.loads(out)["overall"] is True

    def test_rank_collapse(self, capsys):
        code, out, _ = _run(capsys, *self._args("rank_collapse"))
        failed = [r["name"] for r in json.loads(out)["records"] if not r["pass"]]
        assert code == 1 and failed == ["jacobian_rank"]

    def test_crest_flip(self, capsys):
        assert _run(capsys, *self._args("crest", "limits_k60.json"))[0] == 0
        code, out, _ = _run(capsys, *self._args("crest", "limits_k120.json"))
        assert code == 1
        assert [r["name"] for r in json.loads(out)["records"] if not r["pass"]] == ["k_value"]
        code, out, _ = _run(capsys, *self._args("crest", "limits_k60.json"), "--k-min", "120")
        assert code == 1 and json.loads(out)["limits"]["k_min_m"] == 120.0

    def test_csv_rows(self, capsys):
        code, out, _ = _run(capsys, *self._args("flat_plane"), "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and all(r["pass"] == "True" for r in rows)


class TestGradcheck:
    def test_random_pair(self, tmp_path, capsys):
        pred, gt = _random_pair(tmp_path)
        code, out, _ = _run(capsys, "gradcheck", "--input", pred, "--gt", gt)
        doc = json.loads(out)
        assert code == 0 and doc["pass"] and doc["max_rel_error"] < 1e-5

    def test_identical(self, capsys):
        code, out, _ = _run(capsys, "gradcheck", "--input", "fixture:lanes_four.json",
                            "--gt", "fixture:lanes_four.json")
        doc = json.loads(out)
        assert code == 0 and doc["pass"]
        assert all(np.all(np.array(r["gradient"]) == 0.0) for r in doc["records"])

    def test_coincident_points(self, tmp_path, capsys):
        doc = {"y_ref": [0.0, 0.0, 0.0], "lanes": [{"points": [[1, 0, 0]] * 3}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = _run(capsys, "gradcheck", "--input", str(path), "--gt", str(path))
        assert code == 5 and json.loads(err)["error"] == "DegenerateTangentError"


class TestErrors:
    def test_missing_file(self, capsys):
        code, _, err = _run(capsys, "eval", "--input", "nope.json", "--gt", "nope.json")
        assert code == 2 and json.loads(err)["exit_code"] == 2

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "x.json"
        path.write_text("{not json")
        assert _run(capsys, "loss", "--input", str(path), "--gt", str(path))[0] == 2

    def test_thread_env(self, monkeypatch, capsys):
        monkeypatch.setenv("LANEMANIFOLD_THREADS", "1")
        assert _run(capsys, "eval", "--input", "fixture:lanes_four.json",
                    "--gt", "fixture:lanes_four.json")[0] == 0
        monkeypatch.setenv("LANEMANIFOLD_THREADS", "zero")
        assert _run(capsys, "eval", "--input", "fixture:lanes_four.json",
                    "--gt", "fixture:lanes_four.json")[0] == 2


def test_fixture_paths_exist():
    for name in ("lanes_four.json", "offset/pred.json", "crest/limits_k120.json"):
        assert fixture_path(name).is_file()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lanemanifold.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__
