import csv
import io
import json
import os
import socket
import stat
import subprocess
import sys

import pytest

from qtp.cli import main
from qtp.oracle import enumerate_attack
from qtp.report import CSV_COLUMNS

from conftest import cli_json, intercept, run_cli

RUN = ["run", "--variant", "classical", "--k", "4", "--n", "300", "--no-timestamp"]


def test_identical_invocations_are_byte_identical():
    args = RUN + ["--attack", "intercept", "--passes", "1,3", "--basis", "lattice", "--seed", "3"]
    _, first = cli_json(*args)
    _, second = cli_json(*args)
    assert first == second
    d = json.loads(first)
    assert d["schema"] == 1 and "wall_clock_s" not in d


def test_timestamps_present_by_default():
    d, _ = cli_json("run", "--variant", "quantum", "--n", "20")
    assert d["wall_clock_s"] >= 0


def test_seed_env_fallback():
    a, _ = cli_json(*RUN, env_extra={"QTP_SEED": "11"})
    b, _ = cli_json(*RUN, "--seed", "11")
    c, _ = cli_json(*RUN)
    assert a == b
    assert a["sent_digest"] != c["sent_digest"]
    assert c["config"]["seeds"] == {"alice": 0, "bob": 0, "eve": 0, "message": 0}


def test_per_party_seeds_override():
    d, _ = cli_json(*RUN, "--seed", "1", "--bob-seed", "9")
    assert d["config"]["seeds"] == {"alice": 1, "bob": 9, "eve": 1, "message": 1}


def test_batch_engine_matches_session():
    args = ["run", "--variant", "quantum", "--message", "random_qubits", "--complex", "--n", "400",
            "--attack", "intercept", "--passes", "2", "--basis", "continuous", "--no-timestamp"]
    _, a = cli_json(*args)
    _, b = cli_json(*args, "--engine", "batch")
    assert a == b


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--n", "5"],
        ["run", "--variant", "classical", "--k", "1"],
        ["run", "--variant", "auth", "--n", "5"],
        ["run", "--variant", "classical", "--attack", "intercept", "--passes", "7"],
        ["run", "--variant", "classical", "--basis", "fixed:xyz", "--attack", "intercept"],
        ["run", "--variant", "classical", "--message", "random_qubits"],
        ["run", "--variant", "classical", "--attack", "mitm", "--secret-known"],
        ["run", "--variant", "classical", "--message", "bit_file", "--message-file", "/nonexistent"],
        ["oracle", "--variant", "classical", "--attack", "intercept", "--basis", "continuous"],
    ],
)
def test_config_errors_exit_2(args):
    proc = run_cli(*args)
    assert proc.returncode == 2, proc.stderr
    assert "configuration error" in proc.stderr
    assert proc.stdout == ""


def test_connect_to_nothing_exits_3():
    with socket.create_server(("127.0.0.1", 0)) as s:
        port = s.getsockname()[1]
    proc = run_cli("connect", "--variant", "classical", "--n", "3", "--to", f"127.0.0.1:{port}", "--timeout", "1")
    assert proc.returncode == 3
    assert "session aborted" in proc.stderr


def test_csv_output(tmp_path):
    out = tmp_path / "rows.csv"
    d, _ = cli_json(*RUN, "--attack", "intercept", "--csv", str(out))
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 300
    errors = sum(r["sent"] != r["decoded"] for r in rows)
    assert errors == d["bob_bit_errors"]
    right = sum(r["eve_correct"] == "1" for r in rows)
    assert right / 300 == pytest.approx(d["eve"]["eve_accuracy"])


def test_help_documents_csv_columns():
    proc = run_cli("run", "--help")
    for col in CSV_COLUMNS:
        assert col in proc.stdout


def test_oracle_command():
    d, _ = cli_json("oracle", "--variant", "auth", "--k", "4", "--attack", "intercept", "--passes", "1,3",
                    "--basis", "lattice")
    ex = enumerate_attack("auth", 4, intercept([1, 3], "lattice"))
    assert d["eve_accuracy"] == ex.eve_accuracy
    assert d["bob_error_rate"] == ex.bob_error_rate
    assert d["term_count"] == 4 ** 5 * 4


def test_oracle_with_angle_inputs(tmp_path):
    f = tmp_path / "in.txt"
    f.write_text("0\n0.5\n1.2\n")
    d, _ = cli_json("oracle", "--variant", "quantum", "--k", "3", "--attack", "mitm", "--inputs", str(f))
    assert d["alphabet"] == "qubits" and d["eve_accuracy"] is None
    assert d["eve_mean_fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_keygen_then_auth_run(tmp_path):
    path = tmp_path / "key.json"
    proc = run_cli("keygen", "--k", "2", "--n", "3", "--seed", "4", "--out", str(path))
    assert proc.returncode == 0
    assert stat.S_IMODE(os.stat(path).st_mode) == 0o600
    key = json.loads(path.read_text())
    assert key["k"] == 2 and len(key["indices"]) == 3 and set(key["indices"]) <= {0, 1}
    d, _ = cli_json("run", "--variant", "auth", "--k", "2", "--n", "3", "--secret", str(path),
                    "--message", "random_qubits", "--complex", "--no-timestamp")
    assert d["min_output_fidelity"] >= 1 - 1e-9
    proc = run_cli("run", "--variant", "auth", "--k", "4", "--n", "3", "--secret", str(path))
    assert proc.returncode == 2


def test_config_file_with_overrides(tmp_path):
    bits = tmp_path / "msg.txt"
    bits.write_text("1011001\n")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"variant": "classical", "k": 4, "message": {"source": "bit_file", "file": str(bits)},
                               "seeds": {"alice": 1, "bob": 2, "eve": 3, "message": 4}}))
    d, _ = cli_json("run", "--config", str(cfg), "--no-timestamp")
    assert d["config"]["n"] == 7 and d["bob_bit_errors"] == 0
    assert d["config"]["seeds"]["bob"] == 2
    d, _ = cli_json("run", "--config", str(cfg), "--k", "6", "--no-timestamp")
    assert d["config"]["k"] == 6 and d["config"]["seeds"]["bob"] == 2


def test_in_process_main_exit_codes(capsys):
    assert main(["run", "--variant", "quantum", "--n", "5", "--no-timestamp"]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == 1
    assert main(["run", "--variant", "quantum", "--n", "0"]) == 2


def free_port():
    with socket.create_server(("127.0.0.1", 0)) as s:
        return s.getsockname()[1]


def spawn(*args):
    env = dict(os.environ)
    env.pop("QTP_SEED", None)
    return subprocess.Popen([sys.executable, "-m", "qtp", *args], stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                            text=True, env=env)


def test_serve_proxy_connect_processes():
    common = ["--variant", "quantum", "--n", "80", "--seed", "5", "--no-timestamp"]
    bob_port, eve_port = free_port(), free_port()
    bob = spawn("serve", *common, "--listen", f"127.0.0.1:{bob_port}")
    # a probe connection would count as a session, so wait for the stderr banner
    line = bob.stderr.readline()
    assert "listening" in line
    eve = spawn("proxy", "--listen", f"127.0.0.1:{eve_port}", "--upstream", f"127.0.0.1:{bob_port}",
                "--attack", "mitm", "--seed", "5")
    assert "listening" in eve.stderr.readline()
    proc = run_cli("connect", *common, "--to", f"127.0.0.1:{eve_port}")
    bob_out, _ = bob.communicate(timeout=20)
    eve_out, _ = eve.communicate(timeout=20)
    assert proc.returncode == 0 and bob.returncode == 0 and eve.returncode == 0
    alice, bob_rep, eve_rep = json.loads(proc.stdout), json.loads(bob_out), json.loads(eve_out)
    assert alice["sent_digest"] == bob_rep["sent_digest"]
    assert bob_rep["min_output_fidelity"] >= 1 - 1e-9  # Bob cannot tell
    assert eve_rep["kind"] == "mitm" and eve_rep["positions_touched"] == 80
    assert "bit_guesses" in eve_rep
    # Eve's guesses match the message Alice drew
    d, _ = cli_json("run", *common, "--attack", "mitm", "--csv", os.devnull)
    assert d["eve"]["eve_accuracy"] == 1.0
