"""Quantum states and channels: Kraus/Choi representations and a zoo.

Conventions, fixed once for the whole package:

* Choi matrices are normalized *states*: ``J(ch) = (ch (x) id)(|I_D><I_D|)``
  with the channel acting on the FIRST tensor factor.  Consequently the
  partial trace of ``J`` over the first (output) subsystem is ``I/D``.
* Transposition always refers to the computational product basis.
* Channels have equal input and output dimension ``D``; ancillas attached
  to states may have any dimension.

Subsystem indices in this module are 1-based, matching ``keep``/``which``
in :mod:`qblackwell.numerics`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    ValidationError,
    as_matrix,
    hermitize,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    require_hermitian,
)

PSD_TOL = 1e-10
TRACE_TOL = 1e-10
TP_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace PSD Hermitian matrix with a subsystem factorization."""

    dims: tuple
    matrix: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValidationError(f"invalid subsystem dims {self.dims}")
        m = require_hermitian(self.matrix, what="density matrix")
        n = int(np.prod(dims))
        if m.shape != (n, n):
            raise ValidationError(
                f"density matrix shape {m.shape} does not match dims {dims}"
            )
        lam_min = float(np.linalg.eigvalsh(m).min())
        if lam_min < -PSD_TOL:
            raise ValidationError(
                f"density matrix not PSD: min eigenvalue {lam_min:.3e} < -{PSD_TOL:.0e}"
            )
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace {tr!r} deviates from 1 beyond {TRACE_TOL:.0e}")
        m.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))


def pure_state(vec, dims) -> DensityMatrix:
    """|psi><psi| for a (not necessarily normalized) state vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValidationError("zero vector cannot define a pure state")
    v = v / nrm
    return DensityMatrix(tuple(dims), np.outer(v, v.conj()))


def max_entangled(d: int) -> DensityMatrix:
    """The canonical maximally entangled state (1/sqrt(D)) sum_i |ii> on (D, D)."""
    d = int(d)
    if d < 2:
        raise ValidationError(f"max_entangled needs dimension >= 2, got {d}")
    v = np.eye(d, dtype=complex).ravel() / np.sqrt(d)
    return DensityMatrix((d, d), np.outer(v, v.conj()))


def _choi_from_kraus(kraus, d: int) -> np.ndarray:
    phi = np.eye(d, dtype=complex).ravel()
    j = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        u = (np.kron(k, np.eye(d)) @ phi)
        j += np.outer(u, u.conj())
    return hermitize(j / d)


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive trace-preserving map stored as a Kraus list.

    The Choi state is computed once at construction and cached.
    """

    dim: int
    kraus: tuple
    choi: DensityMatrix = None

    def __post_init__(self):
        d = int(self.dim)
        ops = tuple(as_matrix(k) for k in self.kraus)
        if not ops:
            raise ValidationError("channel needs at least one Kraus operator")
        for i, k in enumerate(ops):
            if k.shape != (d, d):
                raise ValidationError(f"Kraus operator {i} shape {k.shape} != ({d},{d})")
        tp = sum(k.conj().T @ k for k in ops)
        defect = float(np.abs(tp - np.eye(d)).max())
        if defect > TP_TOL:
            raise ValidationError(
                f"Kraus operators not trace preserving: |sum K†K - I| = {defect:.3e} > {TP_TOL:.0e}"
            )
        for k in ops:
            k.flags.writeable = False
        j = self.choi
        if j is None:
            j = DensityMatrix((d, d), _choi_from_kraus(ops, d))
        marg = partial_trace(j.matrix, (d, d), keep=2)
        marg_defect = float(np.abs(marg - np.eye(d) / d).max())
        if marg_defect > TP_TOL:
            raise ValidationError(
                f"Choi marginal over the output deviates from I/D by {marg_defect:.3e}"
            )
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "choi", j)


def choi(ch: QuantumChannel) -> DensityMatrix:
    """The Choi state (ch (x) id)(|I_D><I_D|), cached on the channel."""
    return ch.choi


def apply(ch: QuantumChannel, rho: DensityMatrix) -> DensityMatrix:
    """Kraus action sum_i K_i rho K_i† on a full-system state."""
    if rho.dim != ch.dim:
        raise ValidationError(f"state dim {rho.dim} != channel dim {ch.dim}")
    out = sum(k @ rho.matrix @ k.conj().T for k in ch.kraus)
    return DensityMatrix(rho.dims, hermitize(out))


def apply_matrix(ch: QuantumChannel, m) -> np.ndarray:
    """Channel action on an arbitrary operator (not validated as a state)."""
    a = as_matrix(m)
    if a.shape != (ch.dim, ch.dim):
        raise ValidationError(f"operator shape {a.shape} != ({ch.dim},{ch.dim})")
    return sum(k @ a @ k.conj().T for k in ch.kraus)


def apply_to_subsystem(ch: QuantumChannel, rho: DensityMatrix, which: int) -> DensityMatrix:
    """Apply the channel to one tensor factor of a composite state."""
    if which < 1 or which > len(rho.dims):
        raise ValidationError(f"subsystem index {which} out of range for dims {rho.dims}")
    if rho.dims[which - 1] != ch.dim:
        raise ValidationError(
            f"subsystem {which} has dim {rho.dims[which - 1]}, channel dim {ch.dim}"
        )
    out = apply_to_subsystem_matrix(ch, rho.matrix, rho.dims, which)
    return DensityMatrix(rho.dims, out)


def apply_to_subsystem_matrix(ch: QuantumChannel, m, dims, which: int) -> np.ndarray:
    """Same as :func:`apply_to_subsystem` on a bare operator."""
    a = as_matrix(m)
    before = int(np.prod(dims[: which - 1], dtype=int))
    after = int(np.prod(dims[which:], dtype=int))
    out = np.zeros_like(a)
    for k in ch.kraus:
        lifted = np.kron(np.kron(np.eye(before), k), np.eye(after))
        out += lifted @ a @ lifted.conj().T
    return hermitize(out) if np.abs(a - a.conj().T).max() <= 1e-12 * max(1.0, np.abs(a).max()) else out


def compose(e: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    """Sequential composition e after b; Kraus list is all products E_i B_j."""
    if e.dim != b.dim:
        raise ValidationError(f"cannot compose channels of dims {e.dim} and {b.dim}")
    return QuantumChannel(e.dim, tuple(ke @ kb for ke in e.kraus for kb in b.kraus))


def channel_from_choi(j: DensityMatrix, tol: float = 1e-8) -> QuantumChannel:
    """Reconstruct a channel from its Choi state.

    Kraus rank is the numerical rank of J at threshold 1e-9; the Kraus set
    is polished afterwards so trace preservation holds exactly.
    """
    if len(j.dims) != 2 or j.dims[0] != j.dims[1]:
        raise ValidationError(f"Choi state must live on (D, D), got dims {j.dims}")
    d = j.dims[0]
    marg = partial_trace(j.matrix, (d, d), keep=2)
    defect = float(np.abs(marg - np.eye(d) / d).max())
    if defect > tol:
        raise ValidationError(
            f"trace-preservation marginal violated: |Tr_out J - I/D| = {defect:.3e} > {tol:.0e}"
        )
    w, v = np.linalg.eigh(d * j.matrix)
    kraus = [
        np.sqrt(w[i]) * v[:, i].reshape(d, d)
        for i in range(len(w))
        if w[i] > 1e-9
    ]
    if not kraus:
        raise ValidationError("Choi state has no eigenvalue above the rank threshold")
    # Polish: right-multiply by (sum K†K)^(-1/2) to make the map exactly TP.
    m = sum(k.conj().T @ k for k in kraus)
    mw, mv = np.linalg.eigh(hermitize(m))
    if mw.min() <= 0:
        raise ValidationError("Choi state too degenerate to normalize a Kraus set")
    m_isqrt = (mv * (1.0 / np.sqrt(mw))) @ mv.conj().T
    kraus = tuple(k @ m_isqrt for k in kraus)
    return QuantumChannel(d, kraus)


# ---------------------------------------------------------------------------
# Channel zoo
# ---------------------------------------------------------------------------

def identity(d: int) -> QuantumChannel:
    return QuantumChannel(int(d), (np.eye(int(d), dtype=complex),))


def unitary(u) -> QuantumChannel:
    m = as_matrix(u)
    d = m.shape[0]
    defect = float(np.abs(m.conj().T @ m - np.eye(d)).max())
    if defect > 1e-10:
        raise ValidationError(f"matrix is not unitary: |U†U - I| = {defect:.3e}")
    return QuantumChannel(d, (m,))


def _weyl_operators(d: int):
    """Generalized Pauli (shift/clock) unitaries X^a Z^b, a,b in 0..d-1."""
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    z = np.diag(omega ** np.arange(d))
    return [
        np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
        for a in range(d)
        for b in range(d)
    ]


def depolarizing(lam: float, d: int = 2) -> QuantumChannel:
    """rho -> lam * rho + (1 - lam) * I/D."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"depolarizing parameter {lam} outside [0, 1]")
    d = int(d)
    kraus = []
    if lam > 0:
        kraus.append(np.sqrt(lam) * np.eye(d, dtype=complex))
    if lam < 1:
        w = np.sqrt((1.0 - lam) / d**2)
        kraus.extend(w * op for op in _weyl_operators(d))
    return QuantumChannel(d, tuple(kraus))


def amplitude_damping(gamma: float) -> QuantumChannel:
    """Qubit amplitude damping toward |0>."""
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"damping parameter {gamma} outside [0, 1]")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return QuantumChannel(2, (k0, k1))


def dephasing(p: float, d: int = 2) -> QuantumChannel:
    """rho -> (1 - p) * rho + p * diag(rho); p = 1 dephases completely."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"dephasing parameter {p} outside [0, 1]")
    d = int(d)
    kraus = []
    if p < 1:
        kraus.append(np.sqrt(1.0 - p) * np.eye(d, dtype=complex))
    if p > 0:
        for i in range(d):
            proj = np.zeros((d, d), dtype=complex)
            proj[i, i] = np.sqrt(p)
            kraus.append(proj)
    return QuantumChannel(d, tuple(kraus))


def replacer(sigma: DensityMatrix) -> QuantumChannel:
    """rho -> sigma for every input rho."""
    d = sigma.dim
    w, v = np.linalg.eigh(sigma.matrix)
    kraus = []
    for i in range(d):
        if w[i] <= 1e-14:
            continue
        for jdx in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[:, jdx] = np.sqrt(w[i]) * v[:, i]
            kraus.append(k)
    return QuantumChannel(d, tuple(kraus))


# ---------------------------------------------------------------------------
# Random fixtures (explicit seeds everywhere)
# ---------------------------------------------------------------------------

def random_unitary(d: int, rng) -> np.ndarray:
    """Haar unitary via QR of a complex Gaussian matrix."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(d: int, rank: int = None, seed=None) -> QuantumChannel:
    """Random channel from a Haar isometry V: C^D -> C^(D*rank)."""
    rng = np.random.default_rng(seed)
    r = int(rank) if rank else int(d)
    g = rng.normal(size=(d * r, d)) + 1j * rng.normal(size=(d * r, d))
    q, rr = np.linalg.qr(g)
    q = q * (np.diag(rr) / np.abs(np.diag(rr)))
    kraus = tuple(q[i * d : (i + 1) * d, :] for i in range(r))
    return QuantumChannel(d, kraus)


def random_density_matrix(dims, rank: int = None, seed=None) -> DensityMatrix:
    """Random mixed state: partial trace of a random bipartite pure state."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    r = int(rank) if rank else n
    g = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    m = g @ g.conj().T
    return DensityMatrix(dims, m / np.trace(m).real)


def random_pure_state(dims, seed=None) -> DensityMatrix:
    rng = np.random.default_rng(seed)
    n = int(np.prod([int(d) for d in dims]))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return pure_state(v, dims)


# ---------------------------------------------------------------------------
# JSON wire formats
# ---------------------------------------------------------------------------

def channel_to_json(ch: QuantumChannel) -> dict:
    return {"format": 1, "dim": ch.dim, "kraus": [matrix_to_json(k) for k in ch.kraus]}


def channel_from_json(data: dict) -> QuantumChannel:
    _check_format(data)
    try:
        dim = int(data["dim"])
        kraus = tuple(matrix_from_json(k) for k in data["kraus"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed channel JSON: {exc}") from exc
    return QuantumChannel(dim, kraus)


def state_to_json(rho: DensityMatrix) -> dict:
    return {"format": 1, "dims": list(rho.dims), "matrix": matrix_to_json(rho.matrix)}


def state_from_json(data: dict) -> DensityMatrix:
    _check_format(data)
    try:
        dims = tuple(int(d) for d in data["dims"])
        m = matrix_from_json(data["matrix"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed state JSON: {exc}") from exc
    return DensityMatrix(dims, m)


def _check_format(data):
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object")
    version = data.get("format", 1)
    if version != 1:
        raise ValidationError(f"unsupported format version {version!r}")
