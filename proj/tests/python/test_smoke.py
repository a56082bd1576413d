import json
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest

import swingid

DATA = Path(os.environ.get("SWINGID_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))
CASE_A = DATA / "cases" / "case4_sysA.json"


@pytest.fixture(scope="module")
def case_a():
    return swingid.load_case(str(CASE_A))


def test_case_fields(case_a):
    assert case_a.n_buses == 4
    assert case_a.generators == [1, 2]
    assert case_a.M == {1: 0.3, 2: 0.2}
    assert case_a.D[4] == 0.25
    assert np.allclose(case_a.susceptance, case_a.susceptance.T)
    assert swingid.parse_case(case_a.to_json()) == case_a


def test_simulate_and_estimate_noiseless(case_a):
    traj = swingid.simulate(case_a)
    assert traj.delta.shape == (200, 4)
    assert traj.omega.shape == (200, 2)
    assert traj.times[-1] == pytest.approx(2.0)
    est = swingid.estimate_all(case_a, traj, exact_derivatives=True)
    for b in est:
        assert b.status == "ok"
        assert b.rel_err_D < 1e-8
        if b.kind == "gen":
            assert b.rel_err_M < 1e-8
        else:
            assert b.M_hat is None


def test_estimate_json_schema(case_a):
    traj = swingid.add_noise(swingid.simulate(case_a), "gaussian:0.05", 7)
    doc = json.loads(swingid.estimate_to_json(swingid.estimate_all(case_a, traj)))
    assert [d["bus"] for d in doc] == [1, 2, 3, 4]
    for d in doc:
        assert set(d) >= {"bus", "kind", "M_hat", "D_hat", "residual", "rel_err_M", "rel_err_D", "status"}


def test_decentralized_matches(case_a):
    traj = swingid.add_noise(swingid.simulate(case_a), "gaussian:0.05", 3)
    central = swingid.estimate_all(case_a, traj, with_truth=False)
    for b in central:
        assert swingid.estimate_node(case_a, traj, b.bus) == b


def test_derivatives():
    t = np.arange(1, 201) * 0.01
    assert np.max(np.abs(swingid.finite_difference(np.sin(t), 0.01) - np.cos(t))) <= 1e-4
    poly = 1 + 2 * t + 3 * t**2
    assert np.allclose(swingid.savgol_derivative(poly, 0.01, 31, 3), 2 + 6 * t, atol=1e-9)


def test_stlsq_support(case_a):
    traj = swingid.simulate(case_a)
    _, omega_dot = swingid.analytic_derivatives(case_a, traj)
    labels, matrix = swingid.build_library(case_a, traj, 1, swingid.default_library())
    fit = swingid.stlsq(matrix, labels, omega_dot[:, 0], 0.05)
    assert fit["active"] == ["omega", "a"]
    assert fit["converged"]


def test_errors_carry_codes(case_a):
    with pytest.raises(swingid.Error) as info:
        swingid.add_noise(swingid.simulate(case_a), "uniform:1", 1)
    assert info.value.code == "parse"
    with pytest.raises(swingid.Error) as info:
        swingid.load_case("/nonexistent.json")
    assert info.value.code == "io"


def test_run_scenario_deterministic():
    s = swingid.Scenario(str(CASE_A), runs=4)
    a = swingid.run_scenario(s)
    b = swingid.run_scenario(s, threads=1)
    assert [r["seed"] for r in a["runs"]] == [7, 8, 9, 10]
    assert [r["estimates"] for r in a["runs"]] == [r["estimates"] for r in b["runs"]]
    assert a["stats"]["M_1"]["count"] == 4
    assert all(r["elapsed_ms"] > 0 for r in a["runs"])


def test_trajectory_csv_roundtrip(case_a, tmp_path):
    traj = swingid.simulate(case_a)
    path = tmp_path / "traj.csv"
    swingid.save_trajectory_csv(str(path), traj)
    back = swingid.load_trajectory_csv(str(path))
    assert np.array_equal(back.delta, traj.delta)
    assert back.t_s == traj.t_s


CLI = os.environ.get("SWINGID_CLI")


@pytest.mark.skipif(not CLI, reason="CLI path not provided")
def test_cli_reports_machine_readable_errors(tmp_path):
    bad = subprocess.run([CLI, "estimate", "--case", str(CASE_A), "--deriv", "savgol:4:2", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode != 0
    err = json.loads(bad.stderr.strip().splitlines()[-1])
    assert err["error"] == "precondition"
    assert "window" in err["message"]


@pytest.mark.skipif(not CLI, reason="CLI path not provided")
def test_cli_estimate_json(tmp_path):
    ok = subprocess.run([CLI, "estimate", "--case", str(CASE_A), "--runs", "3", "--format", "json",
                         "--out", str(tmp_path)], capture_output=True, text=True)
    assert ok.returncode == 0, ok.stderr
    doc = json.loads((tmp_path / "results.json").read_text())
    assert len(doc["results"][0]["runs"]) == 3
    assert (tmp_path / "timing.csv").exists()
