import json

import numpy as np
import pytest

from gridstate.cli import main
from gridstate.fileio import load_system_file, write_trajectory_csv
from gridstate.simulate import SimConfig, simulate
from gridstate.steady_state import compute_steady_state

from conftest import AnisotropicLoad


@pytest.fixture()
def fixture_file(fixture_path):
    return str(fixture_path)


def write_variant(tmp_path, fixture_path, mutate):
    doc = json.loads(open(fixture_path).read())
    mutate(doc)
    path = tmp_path / "variant.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_steady_state_certifies(tmp_path, fixture_file):
    out = tmp_path / "result.json"
    assert main(["steady-state", fixture_file, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["diagnostics"]["certificate"] is True
    assert {m["case"] for m in doc["machines"]} == {"regular"}


def test_steady_state_sigma_flip(tmp_path, fixture_file):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert main(["steady-state", fixture_file, "-o", str(out_a)]) == 0
    assert main(["steady-state", fixture_file, "-o", str(out_b),
                 "--sigma", "1=-1"]) == 0
    a = json.loads(out_a.read_text())
    b = json.loads(out_b.read_text())
    dtheta = abs(b["machines"][0]["theta"] - a["machines"][0]["theta"])
    assert min(dtheta, abs(dtheta - 2 * np.pi)) == pytest.approx(np.pi,
                                                                 abs=1e-9)
    assert b["machines"][0]["i_f"] == pytest.approx(
        -a["machines"][0]["i_f"], rel=1e-9)
    assert b["diagnostics"]["certificate"] is True


def test_usage_errors(fixture_file):
    assert main(["steady-state", fixture_file, "--sigma", "7=-1"]) == 1
    assert main(["steady-state", fixture_file, "--sigma", "1=0"]) == 1
    assert main(["nonsense"]) == 1


def test_schema_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["steady-state", str(bad)]) == 2


def test_validation_exit_code(tmp_path, fixture_path):
    path = write_variant(tmp_path, fixture_path, lambda doc: doc["machines"][0]
                         .__setitem__("l_sa", doc["machines"][0]["l_s"]))
    assert main(["steady-state", path]) == 3


def test_zero_frequency_infeasible_exit_code(tmp_path, fixture_path, capsys):
    def mutate(doc):
        doc["omega0"] = 0.0
        doc["operating_point"]["generator_voltages"][1]["magnitude"] = 4.0
    path = write_variant(tmp_path, fixture_path, mutate)
    assert main(["steady-state", path]) == 4
    err = capsys.readouterr().err
    assert "zero frequency" in err


def test_newton_failure_exit_code(tmp_path, fixture_path):
    def mutate(doc):
        # A constant-power draw far above what the network can deliver.
        doc["buses"][2]["load"] = {"type": "power",
                                   "params": {"P": 1e6, "Q": 0.0,
                                              "v_min": 1e-3}}
    path = write_variant(tmp_path, fixture_path, mutate)
    assert main(["steady-state", path]) == 4


def test_simulate_row_count_and_metrics(tmp_path, fixture_file, capsys):
    result = tmp_path / "result.json"
    traj = tmp_path / "traj.csv"
    assert main(["steady-state", fixture_file, "-o", str(result)]) == 0
    assert main(["simulate", fixture_file, "--from", str(result),
                 "--dt", "1e-5", "--t-end", "0.002", "-o", str(traj)]) == 0
    err = capsys.readouterr().err
    assert "state_deviation" in err
    lines = traj.read_text().strip().splitlines()
    assert len(lines) == int(0.002 / 1e-5) + 2  # header + samples
    assert main(["simulate", fixture_file, "--from", str(result),
                 "--dt", "1e-5", "--t-end", "0.002", "--record-every", "10",
                 "-o", str(traj)]) == 0
    lines = traj.read_text().strip().splitlines()
    assert len(lines) == int(0.002 / (1e-5 * 10)) + 2


def test_verify_roundtrip_and_corruption(tmp_path, fixture_file):
    result = tmp_path / "result.json"
    traj = tmp_path / "traj.csv"
    assert main(["steady-state", fixture_file, "-o", str(result)]) == 0
    assert main(["simulate", fixture_file, "--from", str(result),
                 "--dt", "1e-5", "--t-end", "0.001", "-o", str(traj)]) == 0
    assert main(["verify", fixture_file, "--traj", str(traj)]) == 0

    lines = traj.read_text().splitlines()
    parts = lines[50].split(",")
    parts[16] = repr(float(parts[16]) * 1.2)  # corrupt one voltage sample
    lines[50] = ",".join(parts)
    traj.write_text("\n".join(lines) + "\n")
    assert main(["verify", fixture_file, "--traj", str(traj)]) == 5


def test_verify_detects_perturbed_start(tmp_path, fixture_file, capsys):
    result = tmp_path / "result.json"
    traj = tmp_path / "traj.csv"
    assert main(["steady-state", fixture_file, "-o", str(result)]) == 0
    assert main(["simulate", fixture_file, "--from", str(result),
                 "--dt", "1e-5", "--t-end", "0.001", "--perturb-v", "0.05",
                 "-o", str(traj)]) == 0
    assert main(["verify", fixture_file, "--traj", str(traj)]) == 5
    assert "sample" in capsys.readouterr().err


def test_verify_flags_nonconforming_load_run(tmp_path, fixture_file):
    # Integrate under an anisotropic load, then verify against the original
    # (conforming) system file: the drift must be flagged.
    sys_, spec = load_system_file(fixture_file)
    ss = compute_steady_state(sys_, spec)
    bad_sys = sys_.with_loads([sys_.loads[0], sys_.loads[1],
                               AnisotropicLoad()])
    traj = simulate(bad_sys, ss.x, ss.u,
                    SimConfig(dt=1e-5, t_end=0.01, record_every=10))
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        write_trajectory_csv(fh, sys_, traj)
    assert main(["verify", fixture_file, "--traj", str(path)]) == 5


def test_verify_missing_columns(tmp_path, fixture_file):
    path = tmp_path / "short.csv"
    path.write_text("t,theta_1\n0.0,0.0\n")
    assert main(["verify", fixture_file, "--traj", str(path)]) == 2


def test_identities_deterministic_output(fixture_file, capsys):
    assert main(["identities", fixture_file, "--seed", "11"]) == 0
    first = capsys.readouterr().out
    assert main(["identities", fixture_file, "--seed", "11"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first.count("PASS") >= 6 and "FAIL" not in first


def test_identities_other_seeds(fixture_file, capsys):
    for seed in ("1", "42"):
        assert main(["identities", fixture_file, "--seed", seed]) == 0
    capsys.readouterr()


def test_result_to_stdout(fixture_file, capsys):
    assert main(["steady-state", fixture_file]) == 0
    out = capsys.readouterr().out
    doc = json.loads(out)
    assert doc["diagnostics"]["certificate"] is True
