import json
import subprocess
import sys

import numpy as np
import pytest

from qblackwell.channels import (
    channel_from_json,
    channel_to_json,
    dephasing,
    depolarizing,
    identity,
    max_entangled,
    state_to_json,
    DensityMatrix,
)
from qblackwell.cli import main
from qblackwell.discrimination import (
    Ensemble,
    ensemble_from_json,
    ensemble_to_json,
    povm_from_json,
)
from qblackwell.blackwell import hermitian_set, hermitian_set_to_json
from qblackwell.channels import pure_state
from qblackwell.numerics import kron


@pytest.fixture()
def files(tmp_path):
    def write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return str(path)

    return tmp_path, write


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def bell_ensemble_json():
    phi_plus = max_entangled(2)
    z = kron(np.diag([1.0, -1.0]), np.eye(2))
    phi_minus = DensityMatrix((2, 2), z @ phi_plus.matrix @ z.conj().T)
    return ensemble_to_json(Ensemble((2, 2), ((0.5, phi_plus), (0.5, phi_minus))))


def test_channel_choi_command(files, capsys):
    _, write = files
    ch = write("id.json", channel_to_json(identity(2)))
    code, out = run_cli(capsys, "channel", "choi", "--channel", ch)
    assert code == 0
    assert out["dims"] == [2, 2]
    assert out["matrix"][0][0] == [0.5, 0.0]


def test_channel_apply_command(files, capsys):
    _, write = files
    ch = write("dep.json", channel_to_json(depolarizing(0.0, 2)))
    st = write("st.json", state_to_json(pure_state([1.0, 0.0], (2,))))
    code, out = run_cli(capsys, "channel", "apply", "--channel", ch, "--state", st)
    assert code == 0
    assert out["matrix"][0][0] == [0.5, 0.0]
    assert out["matrix"][1][1] == [0.5, 0.0]


def test_channel_compose_command(files, capsys):
    _, write = files
    a = write("a.json", channel_to_json(depolarizing(0.6, 2)))
    b = write("b.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "channel", "compose", "--a", a, "--b", b)
    assert code == 0
    composed = channel_from_json(out)
    assert np.abs(composed.choi.matrix - depolarizing(0.3, 2).choi.matrix).max() <= 1e-9


def test_discriminate_command_zero_plus(files, capsys):
    _, write = files
    ens = Ensemble(
        (2, 1),
        ((0.5, pure_state([1.0, 0.0], (2, 1))), (0.5, pure_state([1.0, 1.0], (2, 1)))),
    )
    path = write("ens.json", ensemble_to_json(ens))
    code, out = run_cli(capsys, "discriminate", "--ensemble", path)
    assert code == 0
    assert out["p_max"] == pytest.approx(0.5 * (1 + 1 / np.sqrt(2)), abs=1e-6)
    povm = povm_from_json(out["povm"])  # schema roundtrip
    assert povm.dim == 2


def test_discriminate_through_channel_command(files, capsys):
    _, write = files
    ens_path = write("bell.json", bell_ensemble_json())
    ch = write("dep.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "discriminate", "--ensemble", ens_path, "--channel", ch)
    assert code == 0
    assert out["p_max"] == pytest.approx(0.75, abs=1e-7)


def test_payoff_command(files, capsys):
    _, write = files
    ch = write("id.json", channel_to_json(identity(2)))
    m = write("ops.json", hermitian_set_to_json(hermitian_set([np.eye(4)])))
    code, out = run_cli(capsys, "payoff", "--channel", ch, "--operators", m)
    assert code == 0
    assert out["value"] == pytest.approx(1.0, abs=1e-8)  # Tr[(ch x id)(I)] / D^2


def test_transform_command_roundtrips_as_ensemble(files, capsys):
    _, write = files
    z = np.diag([1.0, -1.0])
    m = write("ops.json", hermitian_set_to_json(hermitian_set([kron(z, np.eye(2))])))
    code, out = run_cli(capsys, "transform", "--operators", m, "--epsilon", "1")
    assert code == 0
    ens = ensemble_from_json(out)
    assert ens.k == 1
    assert out["epsilon_used"] == 1.0
    assert np.allclose(
        [row[i][0] for i, row in enumerate(out["members"][0]["state"])],
        np.array([3, 3, 1, 1]) / 8,
    )


def test_garble_check_feasible_exit_zero(files, capsys):
    _, write = files
    a = write("a.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "garble-check", "--a", a, "--b", a)
    assert code == 0
    assert out["status"] == "feasible"
    assert out["residual"] <= 1e-7


def test_garble_check_infeasible_exit_three(files, capsys):
    _, write = files
    a = write("id.json", channel_to_json(identity(2)))
    b = write("dep.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "garble-check", "--a", a, "--b", b)
    assert code == 3
    assert out["status"] == "infeasible"
    assert "certificate" in out


def test_garble_check_recovers_garbling_kraus(files, capsys):
    _, write = files
    a = write("a.json", channel_to_json(depolarizing(0.25, 2)))
    b = write("b.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "garble-check", "--a", a, "--b", b)
    assert code == 0
    garbling = channel_from_json({"format": 1, **out["garbling"]})
    assert garbling.dim == 2


def test_compare_command(files, capsys):
    _, write = files
    a = write("a.json", channel_to_json(depolarizing(0.3, 2)))
    b = write("b.json", channel_to_json(depolarizing(0.7, 2)))
    code, out = run_cli(capsys, "compare", "--a", a, "--b", b, "--restarts", "2")
    assert code == 0
    assert out["verdict"] == "A-at-least-as-noisy"
    assert out["witness_b_over_a"]["gap"] >= 0.1


def test_witness_command_found_and_not_found(files, capsys):
    _, write = files
    a = write("id.json", channel_to_json(identity(2)))
    b = write("dep.json", channel_to_json(depolarizing(0.5, 2)))
    code, out = run_cli(capsys, "witness", "--a", a, "--b", b, "--seed", "1")
    assert code == 0 and out["found"] is True
    ens = ensemble_from_json(out["ensemble"])  # schema roundtrip
    assert ens.k == 2
    code, out = run_cli(capsys, "witness", "--a", b, "--b", a, "--restarts", "2",
                        "--seed", "1")
    assert code == 0 and out["found"] is False


def test_eve_demo_command(files, capsys):
    _, write = files
    scenario = {
        "format": 1,
        "honest": channel_to_json(identity(2)),
        "eve": channel_to_json(depolarizing(0.5, 2)),
        "ensemble": bell_ensemble_json(),
        "signals": 4000,
        "seed": 9,
    }
    path = write("scenario.json", scenario)
    code, out = run_cli(capsys, "eve-demo", "--scenario", path)
    assert code == 0
    assert out["decision"] == "tampered"
    assert out["analytic_p_tampered"] == pytest.approx(0.75, abs=1e-7)


def test_eve_demo_no_gap_exit_four(files, capsys):
    _, write = files
    scenario = {
        "format": 1,
        "honest": channel_to_json(identity(2)),
        "eve": channel_to_json(identity(2)),
        "ensemble": "auto",
        "signals": 10,
        "seed": 0,
    }
    path = write("scenario.json", scenario)
    code, out = run_cli(capsys, "eve-demo", "--scenario", path)
    assert code == 4
    assert out["status"] == "no-gap"


def test_invalid_input_exit_two(files, capsys):
    tmp_path, write = files
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["channel", "choi", "--channel", str(bad)])
    capsys.readouterr()
    assert code == 2
    # schema violation: non-unitary kraus set
    broken = write("broken.json", {"format": 1, "dim": 2,
                                   "kraus": [[[[0.5, 0.0], [0.0, 0.0]],
                                              [[0.0, 0.0], [0.5, 0.0]]]]})
    code = main(["channel", "choi", "--channel", broken])
    capsys.readouterr()
    assert code == 2


def test_output_file_and_seeded_reproducibility(files, capsys):
    tmp_path, write = files
    a = write("a.json", channel_to_json(identity(2)))
    b = write("b.json", channel_to_json(depolarizing(0.5, 2)))
    out1 = tmp_path / "w1.json"
    out2 = tmp_path / "w2.json"
    assert main(["--out", str(out1), "witness", "--a", a, "--b", b, "--seed", "42"]) == 0
    assert main(["--out", str(out2), "witness", "--a", a, "--b", b, "--seed", "42"]) == 0
    capsys.readouterr()
    assert out1.read_text() == out2.read_text()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "qblackwell.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "garble-check" in proc.stdout
