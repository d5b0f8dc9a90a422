import numpy as np
import pytest

from qblackwell.numerics import ValidationError, hermitize, trace_norm
from qblackwell.sdp import (
    Constraint,
    SdpProblem,
    dump,
    povm_maximize,
    smat,
    solve,
    svec,
)


def random_hermitian(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitize(g)


def random_unitary(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_svec_smat_roundtrip_and_isometry():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3, 5):
        a = random_hermitian(rng, d)
        b = random_hermitian(rng, d)
        assert np.allclose(smat(svec(a), d), a)
        assert svec(a) @ svec(b) == pytest.approx(np.trace(a @ b).real)


def test_solve_trace_one_maximization():
    prob = SdpProblem(
        blocks=(("X", 2),),
        constraints=(Constraint({"X": np.eye(2)}, 1.0),),
        objective={"X": np.eye(2)},
        sense="maximize",
    )
    sol = solve(prob)
    assert sol.status == "feasible-optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-8)
    x = sol.blocks["X"]
    assert np.trace(x).real == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.eigvalsh(x).min() >= -1e-9


def test_solve_negative_trace_infeasible_with_certificate():
    prob = SdpProblem(
        blocks=(("X", 2),),
        constraints=(Constraint({"X": np.eye(2)}, -1.0),),
        objective=None,
        sense="feasibility",
    )
    sol = solve(prob)
    assert sol.status == "infeasible"
    assert sol.certificate_margin >= 1e-7
    s = sol.certificate["X"]
    assert np.linalg.eigvalsh(s).min() >= -1e-12


def test_solve_helstrom_instance_matches_closed_form():
    r1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    r2 = np.outer(plus, plus.conj())
    basis = [smat(e, 2) for e in np.eye(4)]
    constraints = tuple(
        Constraint({"P1": b, "P2": b}, float(np.trace(b).real)) for b in basis
    )
    prob = SdpProblem(
        blocks=(("P1", 2), ("P2", 2)),
        constraints=constraints,
        objective={"P1": 0.5 * r1, "P2": 0.5 * r2},
        sense="maximize",
    )
    sol = solve(prob)
    assert sol.status == "feasible-optimal"
    assert sol.objective == pytest.approx(0.5 * (1 + 1 / np.sqrt(2)), abs=1e-7)


def test_solve_reports_inconsistent_duplicates_before_iteration():
    prob = SdpProblem(
        blocks=(("X", 2),),
        constraints=(
            Constraint({"X": np.eye(2)}, 1.0),
            Constraint({"X": np.eye(2)}, 2.0),
        ),
        objective=None,
        sense="feasibility",
    )
    sol = solve(prob)
    assert sol.status == "infeasible"
    assert sol.iterations == 0
    assert "inconsistent" in sol.message


def test_solve_rejects_zero_dimensional_block():
    with pytest.raises(ValidationError):
        SdpProblem(blocks=(("X", 0),), constraints=(), objective=None,
                   sense="feasibility").validate()


def test_solve_weak_duality_on_random_instances():
    rng = np.random.default_rng(1)
    for trial in range(5):
        d = 3
        targets = [random_hermitian(rng, d) for _ in range(3)]
        opt = povm_maximize(targets)
        sol = opt.solution
        primal, dual_res, gap = sol.residuals
        assert primal <= 1e-7
        assert gap <= 1e-7
        # dual matrix dominates every target and its trace matches the value
        for t in targets:
            assert np.linalg.eigvalsh(opt.dual - t).min() >= -1e-7
        assert np.trace(opt.dual).real == pytest.approx(opt.value, abs=1e-6)


def test_povm_maximize_single_target_forced():
    rng = np.random.default_rng(2)
    n1 = random_hermitian(rng, 3)
    opt = povm_maximize([n1])
    assert opt.value == pytest.approx(np.trace(n1).real, abs=1e-7)
    assert np.allclose(opt.povm[0], np.eye(3), atol=1e-7)


def test_povm_maximize_commuting_targets():
    n1 = np.diag([1.0, 0.0]).astype(complex)
    n2 = np.diag([0.0, 1.0]).astype(complex)
    opt = povm_maximize([n1, n2])
    assert opt.value == pytest.approx(2.0, abs=1e-7)
    assert np.allclose(opt.povm[0], n1, atol=1e-6)
    assert np.allclose(opt.povm[1], n2, atol=1e-6)


def test_povm_maximize_binary_reduction_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n1 = random_hermitian(rng, 3)
        n2 = random_hermitian(rng, 3)
        opt = povm_maximize([n1, n2])
        oracle = 0.5 * (np.trace(n1 + n2).real + trace_norm(n1 - n2))
        assert opt.value == pytest.approx(oracle, abs=1e-7)
        total = sum(opt.povm)
        assert np.abs(total - np.eye(3)).max() <= 1e-9
        achieved = sum(np.trace(p @ n).real for p, n in zip(opt.povm, [n1, n2]))
        assert achieved == pytest.approx(opt.value, abs=1e-7)


def test_povm_maximize_unitary_invariance():
    rng = np.random.default_rng(4)
    targets = [random_hermitian(rng, 3) for _ in range(3)]
    base = povm_maximize(targets).value
    for _ in range(3):
        u = random_unitary(rng, 3)
        rotated = [u @ t @ u.conj().T for t in targets]
        assert povm_maximize(rotated).value == pytest.approx(base, abs=1e-8)


def test_povm_maximize_shift_covariance():
    # Adding c*I to every target raises the value by exactly c * Tr(I),
    # because the POVM elements sum to the identity.
    rng = np.random.default_rng(5)
    d = 3
    targets = [random_hermitian(rng, d) for _ in range(3)]
    base = povm_maximize(targets).value
    c = 0.7
    shifted = [t + c * np.eye(d) for t in targets]
    assert povm_maximize(shifted).value == pytest.approx(base + c * d, abs=1e-8)


def test_povm_maximize_scale_covariance():
    rng = np.random.default_rng(6)
    targets = [random_hermitian(rng, 2) for _ in range(2)]
    base = povm_maximize(targets).value
    c = 2.5
    assert povm_maximize([c * t for t in targets]).value == pytest.approx(c * base, abs=1e-8)


def test_povm_maximize_dimension_mismatch():
    with pytest.raises(ValidationError):
        povm_maximize([np.eye(2), np.eye(3)])


def test_solver_deterministic():
    rng = np.random.default_rng(7)
    targets = [random_hermitian(rng, 3) for _ in range(3)]
    a = povm_maximize(targets)
    b = povm_maximize(targets)
    assert a.value == b.value
    for pa, pb in zip(a.povm, b.povm):
        assert np.array_equal(pa, pb)


def test_dump_mentions_blocks_and_constraints():
    prob = SdpProblem(
        blocks=(("X", 2),),
        constraints=(Constraint({"X": np.eye(2)}, 1.0),),
        objective={"X": np.eye(2)},
        sense="maximize",
    )
    text = dump(prob)
    assert "block X dim 2" in text
    assert "constraint 0" in text
