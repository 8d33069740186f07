import json
from importlib import resources
from pathlib import Path

import pytest

from lipbound import parse_json
from lipbound.cli import main


@pytest.fixture
def fix_dir():
    return Path(str(resources.files("lipbound") / "fixtures"))


@pytest.fixture
def ex1_path(fix_dir):
    return str(fix_dir / "example1.json")


@pytest.fixture
def ex2_path(fix_dir):
    return str(fix_dir / "example2.json")


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


class TestBounds:
    def test_example1_summary(self, capsys, ex1_path):
        rc, out, _ = run(capsys, "bounds", "--net", ex1_path, "--p", "inf", "--eps", "0.1")
        assert rc == 0
        assert "upper=2 lower=1 L_0.1=1" in out

    def test_example2_two_eps(self, capsys, ex2_path):
        rc, out, _ = run(
            capsys, "bounds", "--net", ex2_path, "--p", "1", "--eps", "0.4", "--eps", "0.6"
        )
        assert rc == 0
        assert "L_0.4=1" in out and "L_0.6=0" in out

    def test_missing_file(self, capsys):
        rc, _, err = run(capsys, "bounds", "--net", "/no/such/file.json", "--p", "2")
        assert rc == 1
        assert "error" in err

    def test_negative_eps_usage_error(self, capsys, ex1_path):
        rc, _, err = run(capsys, "bounds", "--net", ex1_path, "--p", "2", "--eps", "-1")
        assert rc == 1

    def test_empty_domain_exit_2(self, capsys, ex1_path, tmp_path):
        dom = tmp_path / "empty.json"
        dom.write_text('{"type":"polytope","A":[[1.0],[-1.0]],"b":[-3.0,2.0]}')
        rc, _, err = run(capsys, "bounds", "--net", ex1_path, "--p", "2", "--domain", str(dom))
        assert rc == 2

    def test_report_bytes_deterministic(self, capsys, ex2_path, tmp_path):
        out = tmp_path / "report.json"
        blobs = []
        for _ in range(2):
            rc, _, _ = run(
                capsys, "bounds", "--net", ex2_path, "--p", "2", "--eps", "0.4",
                "--seed", "3", "--out", str(out),
            )
            assert rc == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_oracle_and_bnb_differ_only_in_stats(self, capsys, ex1_path, ex2_path, tmp_path):
        for i, net in enumerate((ex1_path, ex2_path)):
            docs = []
            for mode in ("oracle", "bnb"):
                out = tmp_path / f"{i}-{mode}.json"
                rc, _, _ = run(
                    capsys, "bounds", "--net", net, "--p", "inf", "--eps", "0.3",
                    "--mode", mode, "--out", str(out),
                )
                assert rc == 0
                doc = json.loads(out.read_text())
                doc.pop("stats")
                doc["config"].pop("out")
                doc["config"].pop("mode")
                docs.append(doc)
            assert docs[0] == docs[1]

    def test_threads_do_not_change_output(self, capsys, ex2_path, tmp_path, monkeypatch):
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"t{threads}.json"
            monkeypatch.setenv("LIPBOUND_THREADS", threads)
            rc, _, _ = run(
                capsys, "bounds", "--net", ex2_path, "--p", "1", "--mode", "oracle",
                "--out", str(out),
            )
            assert rc == 0
            doc = json.loads(out.read_text())
            doc["config"].pop("out")
            outs.append(doc)
        assert outs[0] == outs[1]


class TestCurve:
    def test_example2_csv_steps(self, capsys, ex2_path, tmp_path):
        csv = tmp_path / "curve.csv"
        rc, out, _ = run(capsys, "curve", "--net", ex2_path, "--p", "2", "--csv", str(csv))
        assert rc == 0
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "eps,value"
        assert lines[1:] == ["0,1.0", "0.5,1.0", "0.5,0.0", "inf,0.0"]

    def test_zero_bias_single_segment(self, capsys, tmp_path):
        net = tmp_path / "zb.json"
        net.write_text(
            '{"layers":[{"weights":[[1.0],[-2.0]],"bias":[0.0,0.0]},'
            '{"weights":[[1.0,1.0]],"bias":[0.0]}]}'
        )
        out = tmp_path / "curve.json"
        rc, _, _ = run(capsys, "curve", "--net", str(net), "--p", "inf", "--out", str(out))
        assert rc == 0
        doc = json.loads(out.read_text())
        assert len(doc["curve"]) == 1
        assert doc["curve"][0]["eps"] == "inf"
        assert doc["curve"][0]["value"] == doc["lower"]


class TestEmitAndCheck:
    def test_emit_roundtrip(self, capsys, ex1_path, tmp_path):
        model_path = tmp_path / "m.json"
        rc, out, _ = run(
            capsys, "emit", "--net", ex1_path, "--p", "2", "--eps", "0",
            "--format", "json", "--out", str(model_path),
        )
        assert rc == 0
        assert "variables=9" in out
        model = parse_json(model_path.read_text())
        assert parse_json(model_path.read_text()) == model

    def test_emit_lp_text_file(self, capsys, ex1_path, tmp_path):
        model_path = tmp_path / "m.json"
        rc, _, _ = run(
            capsys, "emit", "--net", ex1_path, "--p", "2", "--eps", "0",
            "--format", "both", "--out", str(model_path),
        )
        assert rc == 0
        assert "y2_1 ^ 2" in (tmp_path / "m.lp").read_text()

    def test_witness_pipeline_exit_zero(self, capsys, ex2_path, tmp_path):
        model_path = tmp_path / "m.json"
        witness_path = tmp_path / "w.json"
        report_path = tmp_path / "r.json"
        rc, _, _ = run(
            capsys, "emit", "--net", ex2_path, "--p", "1", "--eps", "0.4",
            "--out", str(model_path),
        )
        assert rc == 0
        rc, _, _ = run(
            capsys, "bounds", "--net", ex2_path, "--p", "1", "--eps", "0.4",
            "--out", str(report_path), "--emit-witness", str(witness_path),
        )
        assert rc == 0
        rc, out, _ = run(capsys, "check", str(model_path), str(witness_path))
        assert rc == 0
        assert "feasible" in out
        reported = json.loads(report_path.read_text())["eps_values"]["0.4"]
        objective = float(out.split("objective=")[1].splitlines()[0])
        assert objective == pytest.approx(reported, abs=1e-7)

    def test_corrupted_assignment_exit_3(self, capsys, ex2_path, tmp_path):
        model_path = tmp_path / "m.json"
        witness_path = tmp_path / "w.json"
        run(capsys, "emit", "--net", ex2_path, "--p", "1", "--eps", "0.4", "--out", str(model_path))
        run(
            capsys, "bounds", "--net", ex2_path, "--p", "1", "--eps", "0.4",
            "--emit-witness", str(witness_path),
        )
        doc = json.loads(witness_path.read_text())
        doc["values"]["sigma1_1"] = 1.0 - doc["values"]["sigma1_1"]
        witness_path.write_text(json.dumps(doc))
        rc, out, _ = run(capsys, "check", str(model_path), str(witness_path))
        assert rc == 3
        assert "violations" in out

    def test_missing_variable_exit_1(self, capsys, ex2_path, tmp_path):
        model_path = tmp_path / "m.json"
        witness_path = tmp_path / "w.json"
        run(capsys, "emit", "--net", ex2_path, "--p", "1", "--eps", "0.4", "--out", str(model_path))
        run(
            capsys, "bounds", "--net", ex2_path, "--p", "1", "--eps", "0.4",
            "--emit-witness", str(witness_path),
        )
        doc = json.loads(witness_path.read_text())
        doc["values"].pop("u_1")
        witness_path.write_text(json.dumps(doc))
        rc, _, err = run(capsys, "check", str(model_path), str(witness_path))
        assert rc == 1


class TestSample:
    def test_example1(self, capsys, ex1_path):
        rc, out, _ = run(
            capsys, "sample", "--net", ex1_path, "--p", "2", "--samples", "100", "--seed", "7"
        )
        assert rc == 0
        assert "sampled_lower_bound=1" in out
        assert "heuristic" in out

    def test_zero_samples_usage_error(self, capsys, ex1_path):
        rc, _, err = run(capsys, "sample", "--net", ex1_path, "--p", "2", "--samples", "0")
        assert rc == 1


class TestBallRelaxation:
    def test_ball_rejected_without_flag(self, capsys, ex1_path, tmp_path):
        dom = tmp_path / "ball.json"
        dom.write_text('{"type":"l2ball","center":[0.0],"radius":2.0}')
        rc, _, err = run(capsys, "bounds", "--net", ex1_path, "--p", "2", "--domain", str(dom))
        assert rc == 1

    def test_ball_relaxed_with_flag(self, capsys, ex1_path, tmp_path):
        dom = tmp_path / "ball.json"
        dom.write_text('{"type":"l2ball","center":[0.0],"radius":2.0}')
        out = tmp_path / "r.json"
        rc, text, _ = run(
            capsys, "bounds", "--net", ex1_path, "--p", "2", "--domain", str(dom),
            "--relax-ball-to-box", "--out", str(out),
        )
        assert rc == 0
        assert "widened" in text
        assert json.loads(out.read_text())["domain_relaxed"] is True
