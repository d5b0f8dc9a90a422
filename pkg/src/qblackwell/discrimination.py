"""Minimum-error state discrimination, with and without channel processing.

The figure of merit throughout is the maximum probability of correctly
identifying which member of an ensemble was prepared, optimized over all
POVMs.  Binary ensembles admit the Helstrom closed form
``1/2 (1 + ||P1 r1 - P2 r2||_1)``; larger ensembles are solved as SDPs
whose dual (``min Tr Y`` over ``Y >= P_k r_k``) certifies optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .channels import DensityMatrix, QuantumChannel, apply_to_subsystem
from .numerics import (
    ValidationError,
    hermitize,
    matrix_from_json,
    matrix_to_json,
    require_hermitian,
)

POVM_PSD_TOL = 1e-9
POVM_SUM_TOL = 1e-9
PRIOR_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Ensemble:
    """Prior-weighted states on system (x) ancilla."""

    dims: tuple
    members: tuple  # ((prior, DensityMatrix), ...)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 2 or dims[0] < 1 or dims[1] < 1:
            raise ValidationError(f"ensemble dims must be (D, d_anc), got {self.dims}")
        members = tuple((float(p), s) for p, s in self.members)
        if not members:
            raise ValidationError("ensemble needs at least one member")
        for k, (p, s) in enumerate(members):
            if p < -PRIOR_SUM_TOL:
                raise ValidationError(f"prior {k} is negative: {p!r}")
            if not isinstance(s, DensityMatrix):
                raise ValidationError(f"member {k} state must be a DensityMatrix")
            if s.dim != dims[0] * dims[1]:
                raise ValidationError(
                    f"member {k} dim {s.dim} does not match dims {dims}"
                )
        total = sum(p for p, _ in members)
        if abs(total - 1.0) > PRIOR_SUM_TOL:
            raise ValidationError(f"priors sum to {total!r}, deviating from 1 beyond {PRIOR_SUM_TOL:.0e}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "members", members)

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.dims[0] * self.dims[1]


@dataclass(frozen=True)
class Povm:
    """Positive operators resolving the identity, one per outcome."""

    dim: int
    elements: tuple

    def __post_init__(self):
        d = int(self.dim)
        ops = tuple(require_hermitian(e, what=f"POVM element {i}") for i, e in enumerate(self.elements))
        if not ops:
            raise ValidationError("POVM needs at least one element")
        for i, e in enumerate(ops):
            if e.shape[0] != d:
                raise ValidationError(f"POVM element {i} dim {e.shape[0]} != {d}")
            lam = float(np.linalg.eigvalsh(e).min())
            if lam < -POVM_PSD_TOL:
                raise ValidationError(
                    f"POVM element {i} not PSD: min eigenvalue {lam:.3e} < -{POVM_PSD_TOL:.0e}"
                )
        defect = float(np.abs(sum(ops) - np.eye(d)).max())
        if defect > POVM_SUM_TOL:
            raise ValidationError(
                f"POVM elements do not resolve the identity: defect {defect:.3e} > {POVM_SUM_TOL:.0e}"
            )
        for e in ops:
            e.flags.writeable = False
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "elements", ops)


@dataclass(frozen=True)
class DiscriminationResult:
    p_max: float
    povm: Povm
    dual: np.ndarray       # Y >= P_k r_k with Tr Y ~= p_max


def success_probability(ens: Ensemble, povm: Povm) -> float:
    """sum_k P_k Tr(Pi_k r_k) for matching outcome/member counts."""
    if len(povm.elements) != ens.k:
        raise ValidationError(
            f"POVM has {len(povm.elements)} outcomes for {ens.k} ensemble members"
        )
    if povm.dim != ens.dim:
        raise ValidationError(f"POVM dim {povm.dim} != ensemble dim {ens.dim}")
    raw = sum(
        p * np.trace(e @ s.matrix).real
        for (p, s), e in zip(ens.members, povm.elements)
    )
    if raw < -1e-9 or raw > 1.0 + 1e-9:
        raise ValidationError(f"success probability {raw!r} outside [0, 1] beyond tolerance")
    return float(min(max(raw, 0.0), 1.0))


def helstrom_binary(ens: Ensemble) -> DiscriminationResult:
    """Closed-form optimum for two states: 1/2 (1 + ||P1 r1 - P2 r2||_1).

    The optimal POVM projects onto the nonnegative / negative eigenspaces
    of ``P1 r1 - P2 r2`` (eigenvalue 0 assigned to outcome 1).
    """
    if ens.k != 2:
        raise ValidationError(f"helstrom_binary needs exactly 2 members, got {ens.k}")
    (p1, s1), (p2, s2) = ens.members
    delta = p1 * s1.matrix - p2 * s2.matrix
    w, v = np.linalg.eigh(delta)
    pos = v[:, w >= 0]
    pi1 = hermitize(pos @ pos.conj().T)
    povm = Povm(ens.dim, (pi1, np.eye(ens.dim) - pi1))
    p_max = 0.5 * (1.0 + float(np.abs(w).sum()))
    # Dual optimizer: Y = P2 r2 + positive part of delta.
    plus = v[:, w > 0]
    dual = hermitize(p2 * s2.matrix + (plus * w[w > 0]) @ plus.conj().T)
    return DiscriminationResult(float(p_max), povm, dual)


def min_error_discriminate(ens: Ensemble, tol: float = sdp.DEFAULT_TOL,
                           method: str = "auto") -> DiscriminationResult:
    """Maximum correct-identification probability over all POVMs.

    ``method='auto'`` uses the Helstrom closed form for two members and
    the SDP otherwise; ``'sdp'`` forces the solver (useful as a
    cross-check), ``'helstrom'`` forces the closed form.
    """
    if method not in ("auto", "sdp", "helstrom"):
        raise ValidationError(f"unknown method {method!r}")
    if method == "helstrom" or (method == "auto" and ens.k == 2):
        return helstrom_binary(ens)
    if ens.k == 1 and method == "auto":
        d = ens.dim
        (p1, s1) = ens.members[0]
        return DiscriminationResult(1.0, Povm(d, (np.eye(d),)), p1 * s1.matrix)
    targets = [p * s.matrix for p, s in ens.members]
    opt = sdp.povm_maximize(targets, tol=tol)
    povm = Povm(ens.dim, opt.povm)
    return DiscriminationResult(float(opt.value), povm, opt.dual)


def process_ensemble(ens: Ensemble, ch: QuantumChannel) -> Ensemble:
    """Send the system factor of every member through the channel."""
    if ch.dim != ens.dims[0]:
        raise ValidationError(f"channel dim {ch.dim} != ensemble system dim {ens.dims[0]}")
    members = tuple((p, apply_to_subsystem(ch, s, 1)) for p, s in ens.members)
    return Ensemble(ens.dims, members)


def discriminate_through_channel(ens: Ensemble, ch: QuantumChannel,
                                 tol: float = sdp.DEFAULT_TOL,
                                 method: str = "auto") -> DiscriminationResult:
    """Discriminate the ensemble after its system factor passes the channel."""
    return min_error_discriminate(process_ensemble(ens, ch), tol=tol, method=method)


# ---------------------------------------------------------------------------
# JSON wire formats
# ---------------------------------------------------------------------------

def ensemble_to_json(ens: Ensemble) -> dict:
    return {
        "format": 1,
        "dims": list(ens.dims),
        "members": [
            {"prob": float(p), "state": matrix_to_json(s.matrix)} for p, s in ens.members
        ],
    }


def ensemble_from_json(data: dict) -> Ensemble:
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object for the ensemble")
    if data.get("format", 1) != 1:
        raise ValidationError(f"unsupported format version {data.get('format')!r}")
    try:
        dims = tuple(int(d) for d in data["dims"])
        members = tuple(
            (float(m["prob"]), DensityMatrix(dims, matrix_from_json(m["state"])))
            for m in data["members"]
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed ensemble JSON: {exc}") from exc
    return Ensemble(dims, members)


def povm_to_json(povm: Povm) -> dict:
    return {
        "format": 1,
        "dim": povm.dim,
        "elements": [matrix_to_json(e) for e in povm.elements],
    }


def povm_from_json(data: dict) -> Povm:
    if not isinstance(data, dict):
        raise ValidationError("expected a JSON object for the POVM")
    if data.get("format", 1) != 1:
        raise ValidationError(f"unsupported format version {data.get('format')!r}")
    try:
        dim = int(data["dim"])
        elements = tuple(matrix_from_json(e) for e in data["elements"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed POVM JSON: {exc}") from exc
    return Povm(dim, elements)
