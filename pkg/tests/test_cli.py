import json
import subprocess
import sys

import pytest

from crosswalk.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_train_smoke_produces_artifacts(tmp_path):
    code = run_cli("train", "--algo", "ppo", "--svo", "40", "--steps", "1000",
                   "--seed", "7", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "ckpt_final.bin").exists()
    assert (tmp_path / "metrics.csv").exists()
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["phi_deg"] == 40.0
    assert manifest["config_hash"]


def test_eval_rejects_corrupt_checkpoint(tmp_path, capsys):
    bad = tmp_path / "ck.bin"
    bad.write_bytes(b"CWK1" + bytes([99, 0, 0, 0]) + b"\0" * 32)
    code = run_cli("eval", "--checkpoint", str(bad), "--episodes", "2",
                   "--out", str(tmp_path))
    assert code == 1
    assert "version" in capsys.readouterr().err


def test_eval_missing_checkpoint(tmp_path, capsys):
    code = run_cli("eval", "--checkpoint", str(tmp_path / "nope.bin"),
                   "--out", str(tmp_path))
    assert code == 1


def test_gapcurve_monotone_output(tmp_path):
    code = run_cli("gapcurve", "--gaps", "1,2.5,4", "--trials", "2",
                   "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "gapcurve.csv").read_text().splitlines()
    ps = [float(line.split(",")[1]) for line in lines[2:]]
    assert ps == sorted(ps)
    assert ps[0] == 0.0 and ps[-1] == 1.0


def test_pedbench_runs(capsys):
    assert run_cli("pedbench", "--steps", "2000") == 0
    out = capsys.readouterr().out
    assert "median" in out


def test_gallery_writes_traces(tmp_path):
    assert run_cli("gallery", "--out", str(tmp_path)) == 0
    assert (tmp_path / "fixed_lateral_bottom.jsonl").exists()
    assert (tmp_path / "schema.json").exists()


def test_rollout_deterministic(tmp_path):
    actions = tmp_path / "actions.json"
    actions.write_text(json.dumps([0.5] * 50 + [-1.0] * 50))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run_cli("rollout", "--seed", "11", "--svo", "20", "--actions",
                   str(actions), "--out", str(a)) == 0
    assert run_cli("rollout", "--seed", "11", "--svo", "20", "--actions",
                   str(actions), "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
    header = json.loads(a.read_text().splitlines()[0])
    assert header["type"] == "header" and header["seed"] == 11
    assert header["config_hash"]


def test_out_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("CROSSWALK_OUT", str(tmp_path / "from_env"))
    assert run_cli("gapcurve", "--gaps", "4", "--trials", "1") == 0
    assert (tmp_path / "from_env" / "gapcurve.csv").exists()


def test_config_file_respected(tmp_path):
    cfg = tmp_path / "toolkit.cfg"
    cfg.write_text("[pedestrian]\ntheta_f = 0.9\n")
    # raising the crossing threshold shifts the gap curve right: gap 3 s no
    # longer suffices
    assert run_cli("gapcurve", "--gaps", "3", "--trials", "1",
                   "--config", str(cfg), "--out", str(tmp_path)) == 0
    lines = (tmp_path / "gapcurve.csv").read_text().splitlines()
    assert float(lines[2].split(",")[1]) == 0.0


def test_bad_config_reports_error(tmp_path, capsys):
    cfg = tmp_path / "toolkit.cfg"
    cfg.write_text("[pedestrian]\nwarp_drive = 1\n")
    assert run_cli("gapcurve", "--config", str(cfg), "--out", str(tmp_path)) == 1
    assert "unknown key" in capsys.readouterr().err


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_cli("teleport")
    assert exc.value.code == 2


# ------------------------------------------------------------------- bridge

def _bridge_proc(tmp_path):
    return subprocess.Popen(
        [sys.executable, "-m", "crosswalk.cli", "env-bridge"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)


def test_bridge_protocol_roundtrip(tmp_path):
    proc = _bridge_proc(tmp_path)
    try:
        hello = json.loads(proc.stdout.readline())
        assert hello["type"] == "hello"
        assert hello["abi"] == "crosswalk-env-abi/1"
        assert hello["obs_dim"] == 5

        proc.stdin.write(json.dumps({"op": "reset", "seed": 3, "phi_deg": 20.0,
                                     "variant": "aware"}) + "\n")
        reset = json.loads(proc.stdout.readline())
        assert reset["type"] == "reset"
        assert len(reset["obs"]) == 5
        assert json.loads(reset["trace_header"])["seed"] == 3

        total = 0
        for _ in range(400):
            proc.stdin.write(json.dumps({"op": "step", "u": 0.5}) + "\n")
            step = json.loads(proc.stdout.readline())
            assert step["type"] == "step"
            total += 1
            # reward decomposition is mirrored through info
            info = step["info"]
            import math
            expect = math.cos(math.radians(20.0)) * info["r_car"] \
                + math.sin(math.radians(20.0)) * info["r_p"]
            assert abs(step["reward"] - expect) < 1e-12
            assert not (step["terminated"] and step["truncated"])
            if step["terminated"] or step["truncated"]:
                break
        assert total < 400

        # stepping a finished episode reports an error record
        proc.stdin.write(json.dumps({"op": "step", "u": 0.0}) + "\n")
        err = json.loads(proc.stdout.readline())
        assert err["type"] == "error"

        proc.stdin.write(json.dumps({"op": "close"}) + "\n")
        closed = json.loads(proc.stdout.readline())
        assert closed["type"] == "closed"
        assert proc.wait(timeout=10) == 0
    finally:
        proc.kill()


def test_bridge_trace_lines_match_native_rollout(tmp_path):
    actions = [0.3, -0.2, 1.0, 0.7, -1.0] * 40
    actions_file = tmp_path / "actions.json"
    actions_file.write_text(json.dumps(actions))
    native = tmp_path / "native.jsonl"
    assert run_cli("rollout", "--seed", "21", "--svo", "40", "--actions",
                   str(actions_file), "--out", str(native)) == 0

    proc = _bridge_proc(tmp_path)
    try:
        proc.stdout.readline()  # hello
        proc.stdin.write(json.dumps({"op": "reset", "seed": 21,
                                     "phi_deg": 40.0, "variant": "aware"}) + "\n")
        reset = json.loads(proc.stdout.readline())
        lines = [reset["trace_header"]]
        for u in actions:
            proc.stdin.write(json.dumps({"op": "step", "u": u}) + "\n")
            step = json.loads(proc.stdout.readline())
            lines.append(step["trace_line"])
            if step["terminated"] or step["truncated"]:
                break
        proc.stdin.write(json.dumps({"op": "close"}) + "\n")
        bridged = "".join(line + "\n" for line in lines)
        assert bridged == native.read_text()
    finally:
        proc.kill()
