import numpy as np
import pytest

from qblackwell.channels import (
    DensityMatrix,
    QuantumChannel,
    amplitude_damping,
    apply,
    apply_to_subsystem,
    channel_from_choi,
    channel_from_json,
    channel_to_json,
    choi,
    compose,
    dephasing,
    depolarizing,
    identity,
    max_entangled,
    pure_state,
    random_channel,
    random_density_matrix,
    random_pure_state,
    replacer,
    state_from_json,
    state_to_json,
    unitary,
)
from qblackwell.numerics import ValidationError, kron, partial_trace


def choi_action(ch, rho):
    """Independent channel action through the Choi state: D Tr_2[J (1 x rho^T)]."""
    d = ch.dim
    j = ch.choi.matrix
    return d * partial_trace(j @ kron(np.eye(d), rho.T), (d, d), keep=1)


def test_max_entangled_qubit_matrix():
    m = max_entangled(2).matrix
    expect = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expect[i, j] = 0.5
    assert np.allclose(m, expect)


def test_max_entangled_marginals_and_purity():
    for d in (2, 3):
        rho = max_entangled(d)
        assert np.allclose(partial_trace(rho.matrix, (d, d), 1), np.eye(d) / d)
        assert np.allclose(partial_trace(rho.matrix, (d, d), 2), np.eye(d) / d)
        assert np.trace(rho.matrix @ rho.matrix).real == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        max_entangled(1)


def test_identity_channel_apply():
    rho = random_density_matrix((2, 1), seed=0)
    out = apply(identity(2), rho)
    assert np.allclose(out.matrix, rho.matrix)


def test_depolarizing_zero_replaces_with_maximally_mixed():
    rho = random_density_matrix((2, 1), seed=1)
    out = apply(depolarizing(0.0, 2), rho)
    assert np.allclose(out.matrix, np.eye(2) / 2, atol=1e-12)


def test_depolarizing_action_formula():
    rng = np.random.default_rng(2)
    for lam in (0.3, 0.8):
        for d in (2, 3):
            rho = random_density_matrix((d, 1), seed=int(rng.integers(1 << 30)))
            out = apply(depolarizing(lam, d), rho)
            assert np.allclose(out.matrix, lam * rho.matrix + (1 - lam) * np.eye(d) / d,
                               atol=1e-12)


def test_depolarizing_one_is_identity():
    ch = depolarizing(1.0, 2)
    assert np.allclose(ch.choi.matrix, max_entangled(2).matrix)


def test_amplitude_damping_full_decay():
    for seed in range(3):
        rho = random_density_matrix((2, 1), seed=seed)
        out = apply(amplitude_damping(1.0), rho)
        assert np.allclose(out.matrix, np.diag([1.0, 0.0]), atol=1e-12)


def test_replacer_outputs_sigma():
    sigma = random_density_matrix((2, 1), seed=5)
    ch = replacer(sigma)
    for seed in range(3):
        rho = random_density_matrix((2, 1), seed=10 + seed)
        assert np.allclose(apply(ch, rho).matrix, sigma.matrix, atol=1e-12)


def test_zoo_parameter_ranges():
    for bad in (-0.1, 1.1):
        with pytest.raises(ValidationError):
            depolarizing(bad, 2)
        with pytest.raises(ValidationError):
            amplitude_damping(bad)
        with pytest.raises(ValidationError):
            dephasing(bad)
    with pytest.raises(ValidationError):
        unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_kraus_vs_choi_action_agree():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        for _ in range(25):
            ch = random_channel(d, seed=int(rng.integers(1 << 30)))
            rho = random_density_matrix((d, 1), seed=int(rng.integers(1 << 30)))
            assert np.abs(apply(ch, rho).matrix - choi_action(ch, rho.matrix)).max() <= 1e-10


def test_choi_of_identity_and_depolarizing():
    assert np.allclose(choi(identity(3)).matrix, max_entangled(3).matrix)
    assert np.allclose(choi(depolarizing(0.0, 2)).matrix, np.eye(4) / 4)


def test_choi_of_completely_dephasing_qubit():
    j = choi(dephasing(1.0)).matrix
    expect = np.zeros((4, 4))
    expect[0, 0] = expect[3, 3] = 0.5
    assert np.allclose(j, expect, atol=1e-12)


def test_choi_marginal_invariant():
    rng = np.random.default_rng(4)
    for d in (2, 3):
        for _ in range(5):
            ch = random_channel(d, seed=int(rng.integers(1 << 30)))
            marg = partial_trace(ch.choi.matrix, (d, d), keep=2)
            assert np.abs(marg - np.eye(d) / d).max() <= 1e-10
            assert np.linalg.eigvalsh(ch.choi.matrix).min() >= -1e-10


def test_compose_unitary_inverse_is_identity():
    rng = np.random.default_rng(5)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, r = np.linalg.qr(g)
    u = q * (np.diag(r) / np.abs(np.diag(r)))
    ch = compose(unitary(u), unitary(u.conj().T))
    assert np.abs(ch.choi.matrix - max_entangled(3).matrix).max() <= 1e-10


def test_compose_depolarizing_multiplies_parameters():
    a, b = 0.6, 0.5
    composed = compose(depolarizing(a, 2), depolarizing(b, 2))
    assert np.abs(composed.choi.matrix - depolarizing(a * b, 2).choi.matrix).max() <= 1e-10


def test_compose_amplitude_damping_parameter_identity():
    g1, g2 = 0.3, 0.45
    eff = 1 - (1 - g1) * (1 - g2)
    composed = compose(amplitude_damping(g2), amplitude_damping(g1))
    assert np.abs(composed.choi.matrix - amplitude_damping(eff).choi.matrix).max() <= 1e-10


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(6)
    for _ in range(5):
        e = random_channel(2, seed=int(rng.integers(1 << 30)))
        b = random_channel(2, seed=int(rng.integers(1 << 30)))
        rho = random_density_matrix((2, 1), seed=int(rng.integers(1 << 30)))
        assert np.abs(
            apply(compose(e, b), rho).matrix - apply(e, apply(b, rho)).matrix
        ).max() <= 1e-10


def test_compose_associativity_via_choi():
    e = random_channel(2, seed=0)
    f = random_channel(2, seed=1)
    g = random_channel(2, seed=2)
    left = compose(compose(e, f), g)
    right = compose(e, compose(f, g))
    assert np.abs(left.choi.matrix - right.choi.matrix).max() <= 1e-10


def test_channel_from_choi_identity():
    ch = channel_from_choi(max_entangled(2))
    rho = random_density_matrix((2, 1), seed=7)
    assert np.abs(apply(ch, rho).matrix - rho.matrix).max() <= 1e-8


def test_channel_from_choi_roundtrip():
    rng = np.random.default_rng(8)
    for d in (2, 3):
        for _ in range(10):
            ch = random_channel(d, seed=int(rng.integers(1 << 30)))
            rebuilt = channel_from_choi(ch.choi)
            for _ in range(3):
                rho = random_density_matrix((d, 1), seed=int(rng.integers(1 << 30)))
                assert np.abs(apply(rebuilt, rho).matrix - apply(ch, rho).matrix).max() <= 1e-8
            assert np.abs(rebuilt.choi.matrix - ch.choi.matrix).max() <= 1e-8


def test_channel_from_choi_kraus_rank():
    ch = channel_from_choi(choi(depolarizing(0.5, 2)))
    assert len(ch.kraus) == 4  # full-rank qubit Choi state
    ident = channel_from_choi(max_entangled(2))
    assert len(ident.kraus) == 1


def test_channel_from_choi_replacer():
    j = DensityMatrix((2, 2), np.eye(4) / 4)
    ch = channel_from_choi(j)
    for seed in range(3):
        rho = random_density_matrix((2, 1), seed=seed)
        assert np.abs(apply(ch, rho).matrix - np.eye(2) / 2).max() <= 1e-8


def test_channel_from_choi_rejects_bad_marginal():
    rho = random_density_matrix((2, 2), seed=9)  # generic state: wrong marginal
    with pytest.raises(ValidationError):
        channel_from_choi(rho)


def test_apply_to_subsystem_identity_and_product():
    rho = random_density_matrix((2, 3), seed=10)
    out = apply_to_subsystem(identity(2), rho, 1)
    assert np.allclose(out.matrix, rho.matrix)
    a = random_density_matrix((2,), seed=11)
    b = random_density_matrix((3,), seed=12)
    prod = DensityMatrix((2, 3), kron(a.matrix, b.matrix))
    ch = random_channel(2, seed=13)
    expect = kron(apply(ch, a).matrix, b.matrix)
    assert np.abs(apply_to_subsystem(ch, prod, 1).matrix - expect).max() <= 1e-10


def test_apply_to_subsystem_depolarizing_on_bell_entrywise():
    bell = max_entangled(2)
    out = apply_to_subsystem(depolarizing(0.5, 2), bell, 1)
    # Direct Kraus computation: 0.5 * Bell + 0.5 * I/4
    expect = 0.5 * bell.matrix + 0.5 * np.eye(4) / 4
    assert np.abs(out.matrix - expect).max() <= 1e-12


def test_apply_to_subsystem_second_factor():
    rho = random_density_matrix((3, 2), seed=14)
    ch = random_channel(2, seed=15)
    out = apply_to_subsystem(ch, rho, 2)
    assert out.dims == (3, 2)
    assert abs(np.trace(out.matrix).real - 1.0) <= 1e-10
    with pytest.raises(ValidationError):
        apply_to_subsystem(ch, rho, 1)


def test_pure_state_normalizes():
    rho = pure_state([1.0, 1.0], (2,))
    assert np.allclose(rho.matrix, 0.5 * np.ones((2, 2)))


def test_random_pure_state_is_pure():
    rho = random_pure_state((2, 2), seed=16)
    assert np.trace(rho.matrix @ rho.matrix).real == pytest.approx(1.0)


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix((2,), np.array([[1.5, 0.0], [0.0, -0.5]]))
    with pytest.raises(ValidationError):
        DensityMatrix((2,), np.eye(2))  # trace 2
    with pytest.raises(ValidationError):
        DensityMatrix((3,), np.eye(2) / 2)  # dims mismatch


def test_channel_validation_requires_trace_preservation():
    with pytest.raises(ValidationError):
        QuantumChannel(2, (np.eye(2) * 0.5,))


def test_channel_json_roundtrip():
    ch = amplitude_damping(0.35)
    data = channel_to_json(ch)
    back = channel_from_json(data)
    assert np.abs(back.choi.matrix - ch.choi.matrix).max() <= 1e-12
    assert data["format"] == 1


def test_state_json_roundtrip():
    rho = random_density_matrix((2, 2), seed=17)
    back = state_from_json(state_to_json(rho))
    assert back.dims == rho.dims
    assert np.abs(back.matrix - rho.matrix).max() <= 1e-12
