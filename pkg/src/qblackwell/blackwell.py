"""Blackwell-order machinery: payoffs, garbling feasibility and witnesses.

Two channels are compared through two equivalent lenses:

* structurally, by deciding (as an SDP feasibility problem over Choi
  states) whether a garbling channel E with ``a = E o b`` exists;
* operationally, by hunting for ensembles that are *more* distinguishable
  after ``a`` than after ``b``, which certifies that no garbling exists.

Payoff functions are the bridge between the two: a payoff over a set of
Hermitian observables selected by a first-stage measurement reduces to a
POVM optimization, and an affine shift/scale turns any Hermitian set into
a bona fide ensemble with the same optimizer.

Internal subsystem bookkeeping uses the canonical order
(system, partner, env-system, env-partner); the single permutation used
to interleave measurement and observable factors is unit-tested against
its index formula.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .channels import (
    DensityMatrix,
    QuantumChannel,
    apply_to_subsystem_matrix,
    channel_from_choi,
    max_entangled,
    _weyl_operators,
)
from .discrimination import (
    Ensemble,
    Povm,
    discriminate_through_channel,
    ensemble_to_json,
    process_ensemble,
    success_probability,
)
from .numerics import (
    ValidationError,
    hermitize,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    permute_subsystems,
    require_hermitian,
)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class HermitianSet:
    """A list of K Hermitian observables on a common space."""

    dim: int
    operators: tuple

    def __post_init__(self):
        d = int(self.dim)
        ops = tuple(
            require_hermitian(m, what=f"operator {k}") for k, m in enumerate(self.operators)
        )
        if not ops:
            raise ValidationError("HermitianSet needs at least one operator")
        for k, m in enumerate(ops):
            if m.shape[0] != d:
                raise ValidationError(f"operator {k} dim {m.shape[0]} != {d}")
        for m in ops:
            m.flags.writeable = False
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "operators", ops)

    @property
    def k(self) -> int:
        return len(self.operators)


def hermitian_set(operators) -> HermitianSet:
    ops = [require_hermitian(m, what="operator") for m in operators]
    if not ops:
        raise ValidationError("HermitianSet needs at least one operator")
    return HermitianSet(ops[0].shape[0], tuple(ops))


def hermitian_set_to_json(m: HermitianSet) -> dict:
    return {"format": 1, "dim": m.dim, "operators": [matrix_to_json(o) for o in m.operators]}


def hermitian_set_from_json(data: dict) -> HermitianSet:
    if not isinstance(data, dict) or data.get("format", 1) != 1:
        raise ValidationError("malformed HermitianSet JSON")
    try:
        return HermitianSet(int(data["dim"]), tuple(matrix_from_json(o) for o in data["operators"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed HermitianSet JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

# Measurement acts on (system, env-system), observables on (partner,
# env-partner); this permutation interleaves (g, a, d, b) -> (g, d, a, b).
_INTERLEAVE = (0, 2, 1, 3)


def _payoff_targets(phi: DensityMatrix, rho_env: DensityMatrix, m: HermitianSet):
    d = phi.dims[0]
    if phi.dims != (d, d) or rho_env.dims != (d, d):
        raise ValidationError(
            f"payoff requires states on (D, D); got {phi.dims} and {rho_env.dims}"
        )
    if m.dim != d * d:
        raise ValidationError(f"observable dim {m.dim} != D^2 = {d * d}")
    full = kron(phi.matrix, rho_env.matrix)
    dims4 = (d, d, d, d)
    eye = np.eye(d * d)
    targets = []
    for op in m.operators:
        lifted = permute_subsystems(kron(eye, op), dims4, _INTERLEAVE)
        t = full @ lifted
        # Reduce onto the measured pair: permute back to (g, a | d, b), then trace.
        t = permute_subsystems(t, dims4, _INTERLEAVE)
        targets.append(hermitize(partial_trace(t, (d * d, d * d), keep=1)))
    return targets


def payoff(phi: DensityMatrix, rho_env: DensityMatrix, m: HermitianSet, povm: Povm) -> float:
    """Average conditional expectation of the observables under the POVM."""
    d = phi.dims[0]
    if len(povm.elements) != m.k:
        raise ValidationError(f"POVM outcomes {len(povm.elements)} != observable count {m.k}")
    if povm.dim != d * d:
        raise ValidationError(f"POVM dim {povm.dim} != D^2 = {d * d}")
    targets = _payoff_targets(phi, rho_env, m)
    return float(sum(np.trace(e @ t).real for e, t in zip(povm.elements, targets)))


@dataclass(frozen=True)
class PayoffMaximum:
    value: float
    povm: Povm


def payoff_max(phi: DensityMatrix, rho_env: DensityMatrix, m: HermitianSet,
               tol: float = sdp.DEFAULT_TOL) -> PayoffMaximum:
    """Payoff maximized over the first-stage measurement."""
    targets = _payoff_targets(phi, rho_env, m)
    opt = sdp.povm_maximize(targets, tol=tol)
    return PayoffMaximum(float(opt.value), Povm(targets[0].shape[0], opt.povm))


def payoff_max_choi(ch: QuantumChannel, m: HermitianSet,
                    tol: float = sdp.DEFAULT_TOL) -> PayoffMaximum:
    """Maximum payoff in the Choi setting (faithful environment state).

    Equals ``(1/D^2) max_POVM sum_k Tr[Pi_k (ch (x) id)(M_k^T)]`` with the
    transpose taken in the computational product basis; agrees with the
    generic :func:`payoff_max` at the channel's Choi state.
    """
    d = ch.dim
    if m.dim != d * d:
        raise ValidationError(f"observable dim {m.dim} != D^2 = {d * d}")
    targets = [
        hermitize(apply_to_subsystem_matrix(ch, op.T, (d, d), 1)) for op in m.operators
    ]
    opt = sdp.povm_maximize(targets, tol=tol)
    return PayoffMaximum(float(opt.value) / d**2, Povm(d * d, opt.povm))


# ---------------------------------------------------------------------------
# Hermitian sets -> ensembles (the affine shift/scale construction)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformResult:
    ensemble: Ensemble
    lambda_min: float
    epsilon_used: float


def hermitians_to_ensemble(m: HermitianSet, epsilon="auto", dims=None) -> TransformResult:
    """Turn K Hermitian operators into an ensemble of states with priors.

    Each operator is transposed, shifted by ``(eps - L) I`` (L being the
    smallest eigenvalue across the set) and normalized; the priors are the
    normalizing denominators rescaled to sum to one.  ``eps`` must exceed
    ``max_k Tr(M_k)/D`` and be positive; ``'auto'`` picks
    ``max(1, max_k Tr(M_k)/D + 1)``.
    """
    if dims is None:
        d = round(np.sqrt(m.dim))
        if d * d != m.dim:
            raise ValidationError(
                f"cannot infer (D, d_anc) from dim {m.dim}; pass dims explicitly"
            )
        dims = (d, d)
    dims = (int(dims[0]), int(dims[1]))
    if dims[0] * dims[1] != m.dim:
        raise ValidationError(f"dims {dims} do not factor operator dim {m.dim}")
    big_d = dims[0]
    traces = [float(np.trace(op).real) for op in m.operators]
    lam = min(float(np.linalg.eigvalsh(op).min()) for op in m.operators)
    bound = max(traces) / big_d
    if epsilon == "auto":
        eps = max(1.0, bound + 1.0)
    else:
        eps = float(epsilon)
        if eps <= bound:
            raise ValidationError(
                f"epsilon {eps!r} violates the bound epsilon > max_k Tr(M_k)/D = {bound!r}"
            )
        if eps <= 0.0:
            raise ValidationError(
                f"epsilon {eps!r} violates the positivity requirement epsilon > 0"
            )
    n = m.dim
    shift = eps - lam
    dens = [tr + n * shift for tr in traces]
    total = sum(dens)
    members = []
    for op, den in zip(m.operators, dens):
        state = (op.T + shift * np.eye(n)) / den
        members.append((den / total, DensityMatrix(dims, hermitize(state))))
    return TransformResult(Ensemble(dims, tuple(members)), float(lam), float(eps))


# ---------------------------------------------------------------------------
# Garbling feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GarbleResult:
    status: str                       # feasible | infeasible | indeterminate
    garbling: QuantumChannel = None   # the recovered E when feasible
    residual: float = None            # ||(E (x) id)(phi) - psi||_F
    certificate: np.ndarray = None    # separating Hermitian functional on Choi space
    margin: float = None
    solution: sdp.SdpSolution = field(repr=False, default=None)


def _apply_choi_map(x: np.ndarray, phi: np.ndarray, d: int, d2: int) -> np.ndarray:
    """(E (x) id)(phi) for the map E whose (normalized) Choi matrix is x."""
    x4 = x.reshape(d, d, d, d)
    p4 = phi.reshape(d, d2, d, d2)
    out = d * np.einsum("psqt,satb->paqb", x4, p4)
    return out.reshape(d * d2, d * d2)


def garble_check_states(psi: DensityMatrix, phi: DensityMatrix,
                        tol: float = sdp.DEFAULT_TOL) -> GarbleResult:
    """Does a channel E on the first factor map phi to psi?

    Feasibility SDP over the Choi state X of E: X PSD, output marginal
    I/D, and (E_X (x) id)(phi) = psi entrywise.  Feasible verdicts carry
    the recovered channel and its composition residual; infeasible ones a
    separating functional W with <W, psi> strictly below its minimum over
    all channel images of phi.
    """
    if len(psi.dims) != 2 or len(phi.dims) != 2:
        raise ValidationError("garble_check_states expects bipartite states")
    if psi.dims != phi.dims:
        raise ValidationError(f"state dims differ: {psi.dims} vs {phi.dims}")
    d, d2 = phi.dims
    nx = d * d          # E's Choi lives on (D, D)
    nout = d * d2
    # Composition rows: one per svec coordinate of the output space.
    cols = []
    for r in range(nx * nx):
        e = np.zeros(nx * nx)
        e[r] = 1.0
        cols.append(sdp.svec(hermitize(_apply_choi_map(sdp.smat(e, nx), phi.matrix, d, d2))))
    comp = np.array(cols).T           # (nout^2, nx^2)
    rhs = sdp.svec(psi.matrix)
    constraints = []
    for l in range(nout * nout):
        constraints.append(sdp.Constraint({"E": sdp.smat(comp[l], nx)}, float(rhs[l])))
    n_comp = len(constraints)
    eye_d = np.eye(d)
    for s in range(d * d):
        e = np.zeros(d * d)
        e[s] = 1.0
        basis = sdp.smat(e, d)
        constraints.append(
            sdp.Constraint({"E": kron(eye_d, basis)}, float(np.trace(basis).real / d))
        )
    problem = sdp.SdpProblem(
        blocks=(("E", nx),),
        constraints=tuple(constraints),
        objective=None,
        sense="feasibility",
    )
    sol = sdp.solve(problem, tol=tol)
    if sol.status == "feasible-optimal":
        x = sol.blocks["E"]
        w, v = np.linalg.eigh(x)
        x = hermitize((v * np.maximum(w, 0.0)) @ v.conj().T)
        x /= np.trace(x).real
        try:
            garbling = channel_from_choi(DensityMatrix((d, d), x))
        except ValidationError:
            return GarbleResult(INDETERMINATE, solution=sol)
        image = apply_to_subsystem_matrix(garbling, phi.matrix, (d, d2), 1)
        residual = float(np.linalg.norm(image - psi.matrix))
        if residual > tol:
            return GarbleResult(INDETERMINATE, residual=residual, solution=sol)
        return GarbleResult(FEASIBLE, garbling=garbling, residual=residual, solution=sol)
    if sol.status == "infeasible":
        y = sol.certificate_y
        w_mat = hermitize(sdp.smat(np.asarray(y[:n_comp]), nout)) if y is not None else None
        return GarbleResult(
            INFEASIBLE, certificate=w_mat, margin=sol.certificate_margin, solution=sol
        )
    return GarbleResult(INDETERMINATE, solution=sol)


def garble_check(a: QuantumChannel, b: QuantumChannel,
                 tol: float = sdp.DEFAULT_TOL) -> GarbleResult:
    """Does a garbling channel E with ``a = E o b`` exist?"""
    if a.dim != b.dim:
        raise ValidationError(f"channel dims differ: {a.dim} vs {b.dim}")
    return garble_check_states(a.choi, b.choi, tol=tol)


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessResult:
    ensemble: Ensemble
    gap: float            # certified p_max(through a) - p_max(through b)
    p_a: float
    p_b: float


def _certified_gap(ens: Ensemble, a: QuantumChannel, b: QuantumChannel, tol: float):
    """Bracket both discrimination values by SDP primal/dual pairs.

    Returns a lower bound on p_max(ens, a) - p_max(ens, b): the achieved
    success probability of the recovered POVM on the a-side minus a
    rigorous dual upper bound on the b-side.
    """
    ra = discriminate_through_channel(ens, a, tol=tol, method="sdp")
    rb = discriminate_through_channel(ens, b, tol=tol, method="sdp")
    lower_a = success_probability(process_ensemble(ens, a), ra.povm)
    upper_b = float(np.trace(rb.dual).real)
    bump = max(
        0.0,
        -min(
            float(np.linalg.eigvalsh(rb.dual - p * s.matrix).min())
            for p, s in process_ensemble(ens, b).members
        ),
    )
    upper_b += bump * ens.dim
    return lower_a - upper_b, ra, rb


def _bell_states(d: int, d_anc: int):
    if d_anc != d:
        return []
    phi = np.eye(d, dtype=complex).ravel() / np.sqrt(d)
    states = []
    for w in _weyl_operators(d):
        v = np.kron(w, np.eye(d)) @ phi
        states.append(DensityMatrix((d, d), np.outer(v, v.conj())))
    return states


def _equal_prior_ensemble(dims, states) -> Ensemble:
    k = len(states)
    return Ensemble(tuple(dims), tuple((1.0 / k, s) for s in states))


def _candidate_ensembles(a, b, k, d_anc, certificate, tol):
    """Deterministic witness candidates, strongest heuristics first."""
    d = a.dim
    cands = []
    bell = _bell_states(d, d_anc)
    if bell and k <= len(bell):
        cands.append(_equal_prior_ensemble((d, d_anc), bell[:k]))
        for combo in itertools.islice(itertools.combinations(range(len(bell)), k), 8):
            cands.append(_equal_prior_ensemble((d, d_anc), [bell[i] for i in combo]))
    if d_anc == d:
        diff = a.choi.matrix - b.choi.matrix
        w, v = np.linalg.eigh(diff)
        order = np.argsort(-np.abs(w))
        if k <= len(order):
            states = []
            for i in order[:k]:
                vec = v[:, i]
                states.append(DensityMatrix((d, d), np.outer(vec, vec.conj())))
            cands.append(_equal_prior_ensemble((d, d_anc), states))
    if certificate is not None and k == 2 and d_anc == d:
        w_norm = float(np.abs(np.linalg.eigvalsh(certificate)).max())
        if w_norm > 0:
            c = certificate / w_norm
            m = hermitian_set([c.T, -c.T])
            cands.append(hermitians_to_ensemble(m, "auto", dims=(d, d)).ensemble)
    return cands


def _random_ensemble(rng, k, dims) -> Ensemble:
    n = dims[0] * dims[1]
    states = []
    for _ in range(k):
        vec = rng.normal(size=n) + 1j * rng.normal(size=n)
        vec /= np.linalg.norm(vec)
        states.append(DensityMatrix(tuple(dims), np.outer(vec, vec.conj())))
    logits = rng.normal(size=k)
    priors = np.exp(logits) / np.exp(logits).sum()
    priors /= priors.sum()
    return Ensemble(tuple(dims), tuple(zip(priors.tolist(), states)))


def _perturb_ensemble(rng, ens: Ensemble, scale: float) -> Ensemble:
    members = []
    priors = np.array([p for p, _ in ens.members])
    if rng.random() < 0.3:
        priors = np.maximum(priors + scale * 0.2 * rng.normal(size=len(priors)), 1e-6)
    priors = priors / priors.sum()
    idx = rng.integers(len(ens.members))
    for i, (_, s) in enumerate(ens.members):
        mat = s.matrix
        if i == idx:
            w, v = np.linalg.eigh(mat)
            vec = v[:, -1]
            vec = vec + scale * (rng.normal(size=vec.size) + 1j * rng.normal(size=vec.size))
            vec /= np.linalg.norm(vec)
            mat = np.outer(vec, vec.conj())
        members.append((float(priors[i]), DensityMatrix(ens.dims, mat)))
    return Ensemble(ens.dims, tuple(members))


def _quick_gap(ens, a, b, tol):
    pa = discriminate_through_channel(ens, a, tol=tol).p_max
    pb = discriminate_through_channel(ens, b, tol=tol).p_max
    return pa - pb


def find_witness(a: QuantumChannel, b: QuantumChannel, k: int = 2, d_anc: int = None,
                 restarts: int = 8, seed=0, tol: float = sdp.DEFAULT_TOL,
                 certificate: np.ndarray = None):
    """Search for an ensemble more distinguishable through ``a`` than ``b``.

    Tries deterministic seeds (maximally entangled bases, Choi
    eigenvectors, an infeasibility-certificate construction) before
    random-restart hill climbing.  Any hit is re-verified with independent
    SDP solves on both sides and returned only when the certified gap is
    at least ``10 * tol``.  ``None`` means no witness was found, which is
    NOT a proof that a garbling exists.
    """
    if k < 2:
        raise ValidationError(f"witness ensembles need k >= 2, got {k}")
    if a.dim != b.dim:
        raise ValidationError(f"channel dims differ: {a.dim} vs {b.dim}")
    d = a.dim
    d_anc = int(d_anc) if d_anc else d
    required = 10.0 * tol

    if certificate is None:
        probe = garble_check(a, b, tol=tol)
        if probe.status == INFEASIBLE:
            certificate = probe.certificate

    def verified(ens):
        gap, _, _ = _certified_gap(ens, a, b, tol)
        if gap >= required:
            pa = discriminate_through_channel(ens, a, tol=tol, method="sdp").p_max
            pb = discriminate_through_channel(ens, b, tol=tol, method="sdp").p_max
            return WitnessResult(ens, float(gap), float(pa), float(pb))
        return None

    for cand in _candidate_ensembles(a, b, k, d_anc, certificate, tol):
        if _quick_gap(cand, a, b, tol) < required:
            continue
        hit = verified(cand)
        if hit:
            return hit

    rng = np.random.default_rng(seed)
    for _ in range(int(restarts)):
        ens = _random_ensemble(rng, k, (d, d_anc))
        best = _quick_gap(ens, a, b, tol)
        for step in range(12):
            trial = _perturb_ensemble(rng, ens, scale=0.4 * (0.8 ** step))
            g = _quick_gap(trial, a, b, tol)
            if g > best:
                best, ens = g, trial
        if best >= required:
            hit = verified(ens)
            if hit:
                return hit
    return None


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

VERDICT_A_NOISIER = "A-at-least-as-noisy"
VERDICT_B_NOISIER = "B-at-least-as-noisy"
VERDICT_EQUIVALENT = "equivalent"
VERDICT_INCOMPARABLE = "incomparable"
VERDICT_INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ComparisonReport:
    a_to_b: GarbleResult          # does E with a = E o b exist?
    b_to_a: GarbleResult
    verdict: str
    witness_a_over_b: WitnessResult = None   # a more distinguishable than b
    witness_b_over_a: WitnessResult = None


def compare(a: QuantumChannel, b: QuantumChannel, tol: float = sdp.DEFAULT_TOL,
            restarts: int = 8, seed=0, k_max: int = None) -> ComparisonReport:
    """Full two-sided comparison with witness search on infeasible sides."""
    if a.dim != b.dim:
        raise ValidationError(f"channel dims differ: {a.dim} vs {b.dim}")
    g_ab = garble_check(a, b, tol=tol)
    g_ba = garble_check(b, a, tol=tol)
    k_cap = int(k_max) if k_max else a.dim**2

    def hunt(x, y, result, offset):
        if result.status != INFEASIBLE:
            return None
        for k in range(2, max(2, k_cap) + 1):
            w = find_witness(x, y, k=k, d_anc=x.dim, restarts=restarts,
                             seed=(seed, offset, k), tol=tol,
                             certificate=result.certificate)
            if w:
                return w
        return None

    wit_ab = hunt(a, b, g_ab, 1)
    wit_ba = hunt(b, a, g_ba, 2)

    if g_ab.status == INDETERMINATE or g_ba.status == INDETERMINATE:
        verdict = VERDICT_INDETERMINATE
    elif g_ab.status == FEASIBLE and g_ba.status == FEASIBLE:
        verdict = VERDICT_EQUIVALENT
    elif g_ab.status == FEASIBLE:
        verdict = VERDICT_A_NOISIER
    elif g_ba.status == FEASIBLE:
        verdict = VERDICT_B_NOISIER
    else:
        verdict = VERDICT_INCOMPARABLE
    return ComparisonReport(g_ab, g_ba, verdict, wit_ab, wit_ba)


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def garble_result_to_json(res: GarbleResult) -> dict:
    out = {"status": res.status}
    if res.residual is not None:
        out["residual"] = float(res.residual)
    if res.garbling is not None:
        out["garbling"] = {
            "dim": res.garbling.dim,
            "kraus": [matrix_to_json(k) for k in res.garbling.kraus],
        }
    if res.certificate is not None:
        out["certificate"] = matrix_to_json(res.certificate)
    if res.margin is not None:
        out["margin"] = float(res.margin)
    return out


def witness_to_json(w: WitnessResult) -> dict:
    return {
        "ensemble": ensemble_to_json(w.ensemble),
        "gap": float(w.gap),
        "p_max_a": float(w.p_a),
        "p_max_b": float(w.p_b),
    }


def comparison_to_json(rep: ComparisonReport) -> dict:
    out = {
        "format": 1,
        "verdict": rep.verdict,
        "a_to_b": garble_result_to_json(rep.a_to_b),
        "b_to_a": garble_result_to_json(rep.b_to_a),
    }
    if rep.witness_a_over_b:
        out["witness_a_over_b"] = witness_to_json(rep.witness_a_over_b)
    if rep.witness_b_over_a:
        out["witness_b_over_a"] = witness_to_json(rep.witness_b_over_a)
    return out
