import json
import math

import numpy as np
import pytest

from qvalued.cli import main
from qvalued.grids import BOUNDARY, GridFunction, OUTSIDE, empty_grid
from qvalued.qspace import QTuple


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture()
def tuples(tmp_path):
    a = write(tmp_path / "a.json", json.dumps([[-1, 1], [1, 0]]))
    b = write(tmp_path / "b.json", json.dumps([[-1, 0], [1, 1]]))
    return a, b


class TestDist:
    def test_g2(self, tuples, capsys):
        a, b = tuples
        assert main(["dist", "--kind", "g2", "--a", a, "--b", b]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["value"] == pytest.approx(math.sqrt(2))
        assert out["match"] == [0, 1]

    def test_bad_kind(self, tuples, capsys):
        a, b = tuples
        assert main(["dist", "--kind", "g7", "--a", a, "--b", b]) == 1

    def test_malformed_json(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.json", "[[1, 2")
        ok = write(tmp_path / "ok.json", "[[1, 2]]")
        assert main(["dist", "--a", bad, "--b", ok]) == 1
        assert "malformed JSON" in capsys.readouterr().err

    def test_unknown_flag_usage_error(self, tuples):
        a, b = tuples
        with pytest.raises(SystemExit) as exc:
            main(["dist", "--a", a, "--b", b, "--frobnicate", "1"])
        assert exc.value.code == 2


class TestFrameEmbedDecode:
    def test_round_trip(self, tmp_path, capsys):
        frame_path = str(tmp_path / "frame.json")
        assert main(["frame", "--n", "2", "--q", "2", "--seed", "1",
                     "--out", frame_path]) == 0
        obj = json.loads(open(frame_path).read())
        assert set(obj) == {"n", "Q", "K", "epsilon", "bases"}

        tuple_path = write(tmp_path / "t.json", json.dumps([[0.3, -0.2], [1.0, 0.4]]))
        embedded_path = str(tmp_path / "z.csv")
        assert main(["embed", "--frame", frame_path, "--tuple", tuple_path,
                     "--out", embedded_path]) == 0
        coords = np.loadtxt(embedded_path, delimiter=",")
        assert coords.size == obj["Q"] * obj["n"] * obj["K"]

        assert main(["decode", "--frame", frame_path, "--in", embedded_path]) == 0
        decoded = QTuple.from_text(capsys.readouterr().out.strip())
        assert decoded == QTuple([[0.3, -0.2], [1.0, 0.4]]) or np.allclose(
            decoded.canonical().points,
            QTuple([[0.3, -0.2], [1.0, 0.4]]).canonical().points,
            atol=1e-6,
        )

    def test_frame_seed_reproducible(self, tmp_path):
        p1 = str(tmp_path / "f1.json")
        p2 = str(tmp_path / "f2.json")
        main(["frame", "--n", "3", "--q", "2", "--seed", "7", "--out", p1])
        main(["frame", "--n", "3", "--q", "2", "--seed", "7", "--out", p2])
        assert open(p1).read() == open(p2).read()

    def test_missing_frame_field(self, tmp_path):
        bad = write(tmp_path / "frame.json", json.dumps({"n": 2, "Q": 1}))
        t = write(tmp_path / "t.json", "[[1, 0]]")
        assert main(["embed", "--frame", bad, "--tuple", t]) == 1


class TestExtendCli:
    def test_cone(self, tmp_path, capsys):
        pts = [
            {"x": [math.cos(t), math.sin(t)], "value": [[math.cos(t)]]}
            for t in np.linspace(0, 2 * math.pi, 8, endpoint=False)
        ]
        data = write(tmp_path / "cone.json",
                     json.dumps({"m": 2, "R": 1.0, "points": pts}))
        q = write(tmp_path / "q.csv", "0.0,0.0\n1.0,0.0\n")
        out = str(tmp_path / "vals.json")
        assert main(["extend", "cone", "--in", data, "--query", q,
                     "--out", out]) == 0
        vals = json.loads(open(out).read())
        assert len(vals) == 2
        assert vals[1] == [[1.0]]

    def test_whitney(self, tmp_path):
        data = write(
            tmp_path / "w.json",
            json.dumps({
                "box": [[0.0, 1.0]],
                "depth": 6,
                "data": [{"x": [0.0], "value": [[0.0]]},
                         {"x": [1.0], "value": [[1.0]]}],
            }),
        )
        q = write(tmp_path / "q.csv", "0.0\n0.5\n1.0\n")
        out = str(tmp_path / "vals.json")
        assert main(["extend", "whitney", "--in", data, "--query", q,
                     "--out", out]) == 0
        vals = json.loads(open(out).read())
        assert vals[0] == [[0.0]]
        assert vals[2] == [[1.0]]

    def test_plane(self, tmp_path):
        g = empty_grid(2, 1, 1, 7)
        g.values[g.mask != OUTSIDE] = [[2.0]]
        infile = write(tmp_path / "g.json", g.to_json())
        out = str(tmp_path / "plane.json")
        assert main(["extend", "plane", "--in", infile, "--out", out]) == 0
        result = GridFunction.from_json(open(out).read())
        assert result.shape[0] > g.shape[0]


class TestSolveCli:
    def test_square_grid_function_boundary(self, tmp_path, capsys):
        grid = empty_grid(2, 1, 1, 9)
        for idx in grid.nodes(kinds=(BOUNDARY,)):
            x = grid.node_coords(idx)
            grid.values[idx] = [[x[0] + 2 * x[1]]]
        b = write(tmp_path / "b.json", grid.to_json())
        sol_path = str(tmp_path / "sol.json")
        hist_path = str(tmp_path / "hist.csv")
        assert main(["solve", "--boundary", b, "--p", "2", "--tol", "1e-10",
                     "--out", sol_path, "--history", hist_path]) == 0
        sol = GridFunction.from_json(open(sol_path).read())
        for idx in sol.nodes():
            x = sol.node_coords(idx)
            assert sol.values[idx][0, 0] == pytest.approx(x[0] + 2 * x[1], abs=1e-8)
        lines = open(hist_path).read().strip().splitlines()
        assert lines[0] == "iteration,total_energy"
        energies = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(b <= a + 1e-12 * (1 + a) for a, b in zip(energies, energies[1:]))

        # round trips: energy and trace accept the solver's output
        assert main(["energy", "--in", sol_path, "--p", "2"]) == 0
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert out["total"] >= 0
        trace_path = str(tmp_path / "trace.json")
        assert main(["trace", "--in", sol_path, "--out", trace_path]) == 0
        tr = json.loads(open(trace_path).read())
        assert len(tr["points"]) == sum(
            1 for _ in grid.nodes(kinds=(BOUNDARY,))
        )

    def test_curve_spec_boundary(self, tmp_path, capsys):
        curve = [
            {
                "x": [math.cos(t), math.sin(t)],
                "value": [[math.cos(t / 2), math.sin(t / 2)],
                          [-math.cos(t / 2), -math.sin(t / 2)]],
            }
            for t in np.linspace(0, 2 * math.pi, 64, endpoint=False)
        ]
        b = write(tmp_path / "sqrt2.json",
                  json.dumps({"domain": "disk", "Q": 2, "n": 2, "curve": curve}))
        sol_path = str(tmp_path / "sol.json")
        assert main(["solve", "--boundary", b, "--grid", "16", "--p", "2",
                     "--restarts", "1", "--out", sol_path]) == 0
        sol = GridFunction.from_json(open(sol_path).read())
        assert sol.Q == 2 and sol.n == 2
        status = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert status["converged"]

    def test_curve_spec_requires_grid(self, tmp_path):
        b = write(tmp_path / "b.json",
                  json.dumps({"domain": "disk", "Q": 1, "n": 1,
                              "curve": [{"x": [1.0, 0.0], "value": [[0.0]]}]}))
        assert main(["solve", "--boundary", b]) == 1


class TestGridLoader:
    def test_missing_field_named(self, tmp_path, capsys):
        bad = write(tmp_path / "g.json", json.dumps({"m": 2, "n": 1}))
        assert main(["energy", "--in", bad]) == 1
        assert "missing field 'Q'" in capsys.readouterr().err


class TestThreadCap:
    def test_qv_threads_env(self, tuples, monkeypatch, capsys):
        a, b = tuples
        monkeypatch.setenv("QV_THREADS", "1")
        monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
        assert main(["dist", "--a", a, "--b", b]) == 0
        import os
        assert os.environ["OMP_NUM_THREADS"] == "1"

    def test_qv_threads_garbage_ignored(self, tuples, monkeypatch):
        a, b = tuples
        monkeypatch.setenv("QV_THREADS", "many")
        assert main(["dist", "--a", a, "--b", b]) == 0


class TestVerifyCli:
    def test_pass_and_report(self, tmp_path, capsys):
        cfg = write(tmp_path / "cfg.json",
                    json.dumps({"seed": 0, "trials": 15}))
        report_path = str(tmp_path / "report.json")
        assert main(["verify", "--config", cfg, "--report", report_path]) == 0
        out = capsys.readouterr().out
        assert out.count("pass") == 6
        reports = json.loads(open(report_path).read())
        assert {r["name"] for r in reports} == {
            "metric_equivalence", "splitting_lemma", "xi", "sqrt_q_bound",
            "poincare", "zeta_bounds",
        }
        for r in reports:
            assert set(r) == {"name", "trials", "failures", "worst_ratio",
                              "witnesses"}
