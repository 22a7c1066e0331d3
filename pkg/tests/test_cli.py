import json
import subprocess
import sys

import numpy as np
import pytest

from nanopose.cli import (
    EXIT_CONSTRAINT,
    EXIT_NOT_FOUND,
    EXIT_SCHEMA,
    EXIT_USAGE,
    main,
)
from nanopose.pgm import write_pgm


def run_cli(args):
    return main(list(args))


@pytest.fixture
def qgraph_file(tmp_path):
    out = tmp_path / "q" / "qgraph.json"
    out.parent.mkdir()
    assert run_cli(["quantize", "--net", "80x32", "--seed", "3", "--out", str(out)]) == 0
    return out


def frame_pgm(tmp_path, size=162, seed=0):
    p = tmp_path / "frame.pgm"
    img = np.random.default_rng(seed).integers(0, 256, (size, size)).astype(np.uint8)
    write_pgm(p, img)
    return p


class TestAnalyze:
    def test_runs_and_reports(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert run_cli(["analyze", "--net", "160x32", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "14.1 MMAC" in text
        assert "499 kB" in text
        assert "3.03e5" in text
        body = out.read_text()
        assert body.startswith("# nanopose")

    def test_unknown_subcommand_usage_exit(self):
        with pytest.raises(SystemExit) as ei:
            run_cli(["frobnicate"])
        assert ei.value.code == EXIT_USAGE


class TestQuantizeInfer:
    def test_end_to_end(self, tmp_path, qgraph_file):
        img = frame_pgm(tmp_path)
        pose_csv = tmp_path / "pose.csv"
        acts = tmp_path / "acts"
        code = run_cli(["infer", "--qgraph", str(qgraph_file), "--image", str(img),
                        "--out", str(pose_csv), "--dump-activations", str(acts)])
        assert code == 0
        lines = [l for l in pose_csv.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].startswith("x,y,z,theta")
        assert len(lines) == 2
        assert any(f.suffix == ".qtns" for f in acts.iterdir())

    def test_missing_image_exit_3(self, tmp_path, qgraph_file):
        code = run_cli(["infer", "--qgraph", str(qgraph_file),
                        "--image", str(tmp_path / "nope.pgm"), "--out", str(tmp_path / "o.csv")])
        assert code == EXIT_NOT_FOUND

    def test_bad_qgraph_exit_4(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"format\": \"wrong\"}")
        code = run_cli(["infer", "--qgraph", str(bad), "--image", str(bad), "--out", str(tmp_path / "o.csv")])
        assert code == EXIT_SCHEMA


class TestPlanSweep:
    def test_plan_and_sweep(self, tmp_path):
        plan_json = tmp_path / "plan.json"
        report = tmp_path / "occupancy.csv"
        assert run_cli(["plan", "--net", "160x16", "--policy", "resident_l2",
                        "--out", str(plan_json), "--report", str(report)]) == 0
        doc = json.loads(plan_json.read_text())
        assert doc["policy"] == "resident_l2"
        sweep_csv = tmp_path / "sweep.csv"
        assert run_cli(["sweep", "--plan", str(plan_json), "--out", str(sweep_csv)]) == 0
        rows = [l for l in sweep_csv.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "f_fc,f_cl,vdd,fps,mW_fc,mW_cl,mJ_frame"
        assert len(rows) == 71

    def test_infeasible_resident_exit_5(self, tmp_path):
        mem = tmp_path / "mem.json"
        mem.write_text(json.dumps(dict(l1_bytes=65536, l2_bytes=262144,
                                       l3_bytes=8388608, code_budget_l2=81920)))
        code = run_cli(["plan", "--net", "160x32", "--policy", "resident_l2",
                        "--mem", str(mem), "--out", str(tmp_path / "p.json")])
        assert code == EXIT_CONSTRAINT

    def test_calibrate_cost_feeds_sweep(self, tmp_path):
        fit = tmp_path / "fit.json"
        assert run_cli(["calibrate-cost", "--out", str(fit)]) == 0
        doc = json.loads(fit.read_text())
        assert "eta_peak" in doc and "_fit" in doc
        plan_json = tmp_path / "p.json"
        assert run_cli(["plan", "--net", "80x32", "--out", str(plan_json)]) == 0
        out = tmp_path / "sweep.csv"
        assert run_cli(["sweep", "--plan", str(plan_json), "--params", str(fit),
                        "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) > 70


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run_cli(["simulate", "--net", "mocap", "--seed", "1",
                            "--out", str(out), "--metrics-out", str(out) + ".m"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_overrides(self, tmp_path):
        import re

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(delta=2.0, tau=0.4, duration=10.0)))
        m = tmp_path / "m.csv"
        assert run_cli(["simulate", "--net", "mocap", "--seed", "0", "--config", str(cfg),
                        "--out", str(tmp_path / "t.csv"), "--metrics-out", str(m)]) == 0
        dist = float(re.search(r"phase0_final_distance_m,([0-9.e-]+)", m.read_text()).group(1))
        assert abs(dist - 2.0) < 0.1

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(dict(no_such_knob=1)))
        code = run_cli(["simulate", "--net", "mocap", "--config", str(bad),
                        "--out", str(tmp_path / "t2.csv")])
        assert code == EXIT_SCHEMA

    def test_mocap_beats_noisy(self, tmp_path):
        import re

        vals = {}
        for net in ("mocap", "80x32"):
            out = tmp_path / f"{net}.csv"
            m = tmp_path / f"{net}.metrics"
            run_cli(["simulate", "--net", net, "--seed", "1", "--out", str(out),
                     "--metrics-out", str(m)])
            text = m.read_text()
            vals[net] = float(re.search(r"median_e_xy_m,([0-9.e-]+)", text).group(1))
        assert vals["mocap"] < vals["80x32"]


class TestQuantizeWithArtifacts:
    def test_graph_weights_calib_chain(self, tmp_path):
        import nanopose.graph as G
        from nanopose import tensorfile
        from nanopose.floatnet import random_float_net

        graph_json = tmp_path / "g.json"
        assert run_cli(["analyze", "--net", "80x32", "--graph-out", str(graph_json)]) == 0

        g = G.from_json(graph_json.read_text())
        net = random_float_net(g, seed=11)
        wdir = tmp_path / "w"
        wdir.mkdir()
        for name, w in net.weights.items():
            tensorfile.write_tensor(wdir / f"{name}.qtns", w.astype(np.float32))

        calib = tmp_path / "calib"
        calib.mkdir()
        rng = np.random.default_rng(2)
        for k in range(3):
            write_pgm(calib / f"img{k}.pgm",
                      rng.integers(0, 256, (48, 80)).astype(np.uint8))

        out = tmp_path / "qg" / "qgraph.json"
        out.parent.mkdir()
        code = run_cli(["quantize", "--graph", str(graph_json), "--weights", str(wdir),
                        "--calib", str(calib), "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["format"] == "nanopose-qgraph"
        assert "_provenance" in doc and doc["_provenance"]["inputs"]


class TestAugmentCmd:
    def test_augment_writes_samples(self, tmp_path):
        img = frame_pgm(tmp_path, size=160)
        out = tmp_path / "aug"
        assert run_cli(["augment", "--image", str(img), "--label", "1.3,0.2,0,0.1",
                        "--count", "5", "--seed", "7", "--out", str(out)]) == 0
        assert len(list(out.glob("*.pgm"))) == 5
        labels = (out / "labels.csv").read_text()
        assert "aug_0004.pgm" in labels


class TestEntryPoint:
    def test_module_invocation(self):
        res = subprocess.run([sys.executable, "-m", "nanopose.cli", "--version"],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert "nanopose" in res.stdout
