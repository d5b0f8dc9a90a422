"""Small dense semidefinite-program solver with feasibility certificates.

Problems are stated over complex Hermitian PSD variable blocks with
real-linear equality constraints:

    maximize    sum_j <C_j, X_j>
    subject to  sum_j <A_ij, X_j> = b_i      (i = 1..m)
                X_j >= 0                     (Hermitian PSD)

(or pure feasibility, with no objective).  Internally each Hermitian block
is embedded as a real symmetric block of doubled dimension and handed to
cvxopt's cone LP solver; the embedding is an implementation detail and all
reported quantities live in the complex model.

The solver never guesses a verdict: a problem is ``feasible-optimal`` only
when the recovered primal/dual pair meets the residual contracts,
``infeasible`` only when a Farkas certificate with a verified margin is in
hand, and ``indeterminate`` otherwise.

Preprocessing: data is scaled to unit spectral norm, redundant constraint
rows are dropped (inconsistent duplicates yield an infeasibility
certificate before any iteration), and systems whose equalities pin the
variables completely are decided by direct linear algebra instead of the
interior-point iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .numerics import ValidationError, hermitize, require_hermitian

DEFAULT_TOL = 1e-7
_RANK_TOL = 1e-9        # row-reduction threshold on unit-scaled data
_CONE_EPS = 1e-9        # tolerated PSD violation of recovered primal blocks


# ---------------------------------------------------------------------------
# Hermitian <-> real-coordinate plumbing
# ---------------------------------------------------------------------------

def svec(h: np.ndarray) -> np.ndarray:
    """Isometric real coordinates of a Hermitian matrix.

    Ordering: diagonal, then sqrt(2)*Re of the strict upper triangle
    (column-major), then sqrt(2)*Im of the same entries.  Satisfies
    ``svec(A) @ svec(B) == Tr(A B)`` for Hermitian A, B.
    """
    d = h.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate(
        [h.diagonal().real, np.sqrt(2.0) * h[iu].real, np.sqrt(2.0) * h[iu].imag]
    )


def smat(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    iu = np.triu_indices(d, k=1)
    noff = iu[0].size
    m = np.zeros((d, d), dtype=complex)
    m[np.diag_indices(d)] = v[:d]
    off = (v[d : d + noff] + 1j * v[d + noff :]) / np.sqrt(2.0)
    m[iu] = off
    m[(iu[1], iu[0])] = off.conj()
    return m


def _embed_real(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]]; spectrum is doubled."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _cone_basis(d: int) -> np.ndarray:
    """Columns: full-storage embeddings of the svec basis elements of dim d."""
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d)
        e[k] = 1.0
        cols.append(_embed_real(smat(e, d)).ravel(order="F"))
    return np.array(cols).T


# ---------------------------------------------------------------------------
# Problem / solution containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """One real-linear equality: sum_j <coeffs[label_j], X_j> = rhs."""

    coeffs: dict
    rhs: float


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple            # ((label, dim), ...)
    constraints: tuple       # (Constraint, ...)
    objective: dict | None   # label -> Hermitian coefficient; None = feasibility
    sense: str = "maximize"  # "maximize" | "feasibility"

    def validate(self):
        if not self.blocks:
            raise ValidationError("SDP problem needs at least one block")
        labels = [lab for lab, _ in self.blocks]
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate block labels")
        for lab, d in self.blocks:
            if int(d) < 1:
                raise ValidationError(f"block {lab!r} has zero/negative dimension {d}")
        dims = dict(self.blocks)
        for src in ([self.objective] if self.objective else []) + [
            c.coeffs for c in self.constraints
        ]:
            for lab, coef in src.items():
                if lab not in dims:
                    raise ValidationError(f"coefficient for unknown block {lab!r}")
                a = require_hermitian(coef, what=f"coefficient on block {lab!r}")
                if a.shape[0] != dims[lab]:
                    raise ValidationError(
                        f"coefficient dim {a.shape[0]} mismatches block {lab!r} dim {dims[lab]}"
                    )
        for c in self.constraints:
            if not np.isfinite(c.rhs):
                raise ValidationError("constraint right-hand side must be finite")
        if self.sense not in ("maximize", "feasibility"):
            raise ValidationError(f"unknown sense {self.sense!r}")


@dataclass(frozen=True)
class SdpSolution:
    status: str                      # feasible-optimal | infeasible | indeterminate
    blocks: dict | None              # label -> Hermitian PSD primal matrix
    objective: float | None
    duals: np.ndarray | None         # one multiplier per input constraint
    certificate: dict | None         # label -> Hermitian part of the Farkas functional
    certificate_y: np.ndarray | None
    certificate_margin: float | None
    residuals: tuple                 # (primal-eq, dual, gap), post-scaling
    iterations: int
    message: str = ""


def dump(problem: SdpProblem) -> str:
    """Plain-text dump of a problem for offline reproduction."""
    out = [f"sense {problem.sense}"]
    for lab, d in problem.blocks:
        out.append(f"block {lab} dim {d}")
    if problem.objective:
        for lab, c in problem.objective.items():
            out.append(f"objective {lab}\n{np.array_str(np.asarray(c), precision=12)}")
    for i, con in enumerate(problem.constraints):
        out.append(f"constraint {i} rhs {con.rhs!r}")
        for lab, c in con.coeffs.items():
            out.append(f"  {lab}\n{np.array_str(np.asarray(c), precision=12)}")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

class _Workspace:
    """Vectorized, scaled problem data plus index bookkeeping."""

    def __init__(self, problem: SdpProblem):
        problem.validate()
        self.problem = problem
        self.labels = [lab for lab, _ in problem.blocks]
        self.dims = [int(d) for _, d in problem.blocks]
        self.sizes = [d * d for d in self.dims]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.n = int(self.offsets[-1])

        def vectorize(coeffs):
            row = np.zeros(self.n)
            for lab, coef in coeffs.items():
                j = self.labels.index(lab)
                row[self.offsets[j] : self.offsets[j + 1]] = svec(hermitize(np.asarray(coef, dtype=complex)))
            return row

        cvec = np.zeros(self.n)
        if problem.objective and problem.sense == "maximize":
            cvec = vectorize(problem.objective)
        self.obj_scale = max(1.0, self._specnorm(cvec))
        self.c = cvec / self.obj_scale

        rows, rhs, scales = [], [], []
        for con in problem.constraints:
            row = vectorize(con.coeffs)
            s = self._specnorm(row)
            scales.append(s if s > 0 else 1.0)
            rows.append(row / scales[-1])
            rhs.append(float(con.rhs) / scales[-1])
        self.a = np.array(rows) if rows else np.zeros((0, self.n))
        self.b = np.array(rhs)
        self.row_scales = np.array(scales)

    def _specnorm(self, row: np.ndarray) -> float:
        """Max spectral norm over the blocks encoded in a coefficient row."""
        worst = 0.0
        for j, d in enumerate(self.dims):
            seg = row[self.offsets[j] : self.offsets[j + 1]]
            if np.any(seg):
                w = np.linalg.eigvalsh(smat(seg, d))
                worst = max(worst, float(np.abs(w).max()))
        return worst

    def split(self, x: np.ndarray) -> dict:
        out = {}
        for j, lab in enumerate(self.labels):
            out[lab] = hermitize(smat(x[self.offsets[j] : self.offsets[j + 1]], self.dims[j]))
        return out

    def combine(self, y: np.ndarray) -> dict:
        """Hermitian per-block matrices of sum_i y_i A_i (scaled data)."""
        v = self.a.T @ y if y.size else np.zeros(self.n)
        return self.split(v)

    def min_eig(self, mats: dict) -> float:
        return min(float(np.linalg.eigvalsh(mats[lab]).min()) for lab in self.labels)


def _reduce_rows(a: np.ndarray, tol: float = _RANK_TOL):
    """Greedy Gram-Schmidt row selection; returns (selected, dropped) indices."""
    selected, dropped = [], []
    q = []
    for i in range(a.shape[0]):
        r = a[i].copy()
        for _ in range(2):  # reorthogonalize once for numerical hygiene
            for qi in q:
                r -= (qi @ r) * qi
        nr = np.linalg.norm(r)
        if nr > tol:
            q.append(r / nr)
            selected.append(i)
        else:
            dropped.append(i)
    return selected, dropped


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = 200) -> SdpSolution:
    """Solve an :class:`SdpProblem`, never rounding a verdict.

    Residual contracts (post-scaling): ``feasible-optimal`` implies primal
    equality residual and duality gap at most ``tol``; ``infeasible``
    implies a Farkas certificate with margin at least ``tol``.
    """
    ws = _Workspace(problem)
    sel, dropped = _reduce_rows(ws.a)
    a_sel = ws.a[sel]
    b_sel = ws.b[sel]

    # Consistency of dropped (redundant) rows; an inconsistent duplicate is a
    # pre-iteration infeasibility certificate with S = 0.
    if dropped:
        w, *_ = np.linalg.lstsq(a_sel.T, ws.a[dropped].T, rcond=None)
        mismatch = ws.b[dropped] - w.T @ b_sel
        bad = np.where(np.abs(mismatch) > 1e-8 * (1.0 + np.abs(ws.b[dropped])))[0]
        if bad.size:
            i = int(bad[0])
            y = np.zeros(ws.a.shape[0])
            y[dropped[i]] = -1.0
            y[sel] = w[:, i]
            y /= mismatch[i]  # now b'y = -1, sum y_i A_i ~ 0
            return _certify_infeasible(ws, y, tol, iterations=0,
                                       message="inconsistent duplicate constraints")

    rank = len(sel)
    if rank == ws.n:
        return _solve_pinned(ws, a_sel, b_sel, sel, tol)
    return _solve_conelp(ws, a_sel, b_sel, sel, tol, max_iter)


def _unscaled_duals(ws: _Workspace, sel, y_sel: np.ndarray) -> np.ndarray:
    duals = np.zeros(len(ws.problem.constraints))
    duals[sel] = y_sel * ws.obj_scale / ws.row_scales[sel]
    return duals


def _certify_infeasible(ws: _Workspace, y: np.ndarray, tol: float, iterations: int,
                        message: str = "") -> SdpSolution:
    """Polish a Farkas candidate y (scaled frame) and verify its margin.

    A valid certificate has S_j = sum_i y_i A_ij >= 0 for every block and
    b'y < 0.  Small negative eigenvalues are lifted with the identity
    tuple when it lies in the constraint row span (then any feasible X has
    a known trace sum, so the lift is rigorous).
    """
    mats = ws.combine(y)
    lam = ws.min_eig(mats)
    bty = float(ws.b @ y)
    if lam < 0:
        target = np.concatenate([svec(np.eye(d)) for d in ws.dims])
        u, *_ = np.linalg.lstsq(ws.a.T, target, rcond=None)
        span_err = np.linalg.norm(ws.a.T @ u - target)
        if span_err > 1e-9:
            return SdpSolution("indeterminate", None, None, None, None, None, None,
                               (np.inf, np.inf, np.inf), iterations,
                               message or "cannot polish Farkas certificate")
        alpha = -lam * (1.0 + 1e-9)
        y = y + alpha * u
        mats = ws.combine(y)
        lam = ws.min_eig(mats)
        bty = float(ws.b @ y)
    margin = -bty / max(np.linalg.norm(y), 1e-300)
    if lam >= -1e-12 and margin >= tol:
        return SdpSolution(
            "infeasible", None, None, None,
            certificate=mats,
            certificate_y=y / ws.row_scales,
            certificate_margin=float(margin),
            residuals=(np.inf, 0.0, np.inf),
            iterations=iterations,
            message=message,
        )
    return SdpSolution("indeterminate", None, None, None, None, None, None,
                       (np.inf, np.inf, np.inf), iterations,
                       message or f"Farkas margin {margin:.3e} below tolerance")


def _finish_optimal(ws: _Workspace, sel, x: np.ndarray, y_sel: np.ndarray,
                    tol: float, iterations: int) -> SdpSolution:
    """Assemble a solution from scaled primal/dual iterates, checking contracts."""
    blocks = ws.split(x)
    primal_eq = float(np.abs(ws.a[sel] @ x - ws.b[sel]).max()) if len(sel) else 0.0
    v = (ws.a[sel].T @ y_sel if len(sel) else np.zeros(ws.n)) - ws.c
    s_mats = ws.split(v)
    dual_res = max(0.0, -ws.min_eig(s_mats))
    primal_obj = float(ws.c @ x)
    dual_obj = float(ws.b[sel] @ y_sel) if len(sel) else 0.0
    gap = abs(dual_obj - primal_obj)
    cone_violation = max(0.0, -ws.min_eig(blocks))
    status = (
        "feasible-optimal"
        if primal_eq <= tol and gap <= tol and dual_res <= tol and cone_violation <= _CONE_EPS
        else "indeterminate"
    )
    return SdpSolution(
        status,
        blocks,
        float(primal_obj * ws.obj_scale),
        _unscaled_duals(ws, sel, y_sel),
        None, None, None,
        residuals=(primal_eq, dual_res, gap),
        iterations=iterations,
    )


def _solve_pinned(ws: _Workspace, a_sel, b_sel, sel, tol: float) -> SdpSolution:
    """Equalities determine the variables: decide by direct linear algebra."""
    x = np.linalg.solve(a_sel, b_sel) if a_sel.shape[0] == a_sel.shape[1] else \
        np.linalg.lstsq(a_sel, b_sel, rcond=None)[0]
    blocks = ws.split(x)
    lam = ws.min_eig(blocks)
    if lam >= -_CONE_EPS:
        y_sel = np.linalg.solve(a_sel.T, ws.c) if a_sel.shape[0] == a_sel.shape[1] else \
            np.linalg.lstsq(a_sel.T, ws.c, rcond=None)[0]
        return _finish_optimal(ws, sel, x, y_sel, tol, iterations=0)
    # Unique affine point violates the cone: exact separating functional from
    # the most negative eigenvector, expressed in the constraint row span.
    worst_lab, worst_vec = None, None
    for j, lab in enumerate(ws.labels):
        w, v = np.linalg.eigh(blocks[lab])
        if w[0] <= lam + 1e-15:
            worst_lab, worst_vec = lab, v[:, 0]
            break
    target = np.zeros(ws.n)
    j = ws.labels.index(worst_lab)
    target[ws.offsets[j] : ws.offsets[j + 1]] = svec(np.outer(worst_vec, worst_vec.conj()))
    y_sel = np.linalg.solve(a_sel.T, target) if a_sel.shape[0] == a_sel.shape[1] else \
        np.linalg.lstsq(a_sel.T, target, rcond=None)[0]
    y = np.zeros(ws.a.shape[0])
    y[sel] = y_sel
    return _certify_infeasible(ws, y, tol, iterations=0,
                               message="equalities pin the variables outside the cone")


def _solve_conelp(ws: _Workspace, a_sel, b_sel, sel, tol: float, max_iter: int) -> SdpSolution:
    gmats, hsize = [], 0
    for d in ws.dims:
        gmats.append(-_cone_basis(d))
        hsize += (2 * d) ** 2
    g = np.zeros((hsize, ws.n))
    r = 0
    for j, d in enumerate(ws.dims):
        g[r : r + (2 * d) ** 2, ws.offsets[j] : ws.offsets[j + 1]] = gmats[j]
        r += (2 * d) ** 2
    dims = {"l": 0, "q": [], "s": [2 * d for d in ws.dims]}
    options = {
        "show_progress": False,
        "maxiters": int(max_iter),
        "abstol": min(tol * 1e-2, 1e-9),
        "reltol": min(tol * 1e-2, 1e-9),
        "feastol": min(tol * 1e-2, 1e-9),
    }
    try:
        sol = cvx_solvers.conelp(
            cvx_matrix(-ws.c),
            cvx_matrix(g),
            cvx_matrix(np.zeros(hsize)),
            dims,
            cvx_matrix(a_sel) if len(sel) else cvx_matrix(0.0, (0, ws.n)),
            cvx_matrix(b_sel) if len(sel) else cvx_matrix(0.0, (0, 1)),
            options=options,
        )
    except (ArithmeticError, ValueError, ZeroDivisionError) as exc:
        return SdpSolution("indeterminate", None, None, None, None, None, None,
                           (np.inf, np.inf, np.inf), 0, f"cone solver failed: {exc}")

    iterations = int(sol.get("iterations", 0) or 0)
    status = sol["status"]
    if status == "optimal":
        x = np.array(sol["x"]).ravel()
        y_sel = np.array(sol["y"]).ravel() if len(sel) else np.zeros(0)
        return _finish_optimal(ws, sel, x, y_sel, tol, iterations)
    if status == "primal infeasible":
        y = np.zeros(ws.a.shape[0])
        y[sel] = np.array(sol["y"]).ravel()
        return _certify_infeasible(ws, y, tol, iterations)
    if status == "dual infeasible":
        return SdpSolution("indeterminate", None, None, None, None, None, None,
                           (np.inf, np.inf, np.inf), iterations,
                           "objective unbounded above (dual infeasible)")
    # 'unknown': try to salvage the final iterate, else stay indeterminate.
    if sol.get("x") is not None and sol.get("y") is not None:
        x = np.array(sol["x"]).ravel()
        y_sel = np.array(sol["y"]).ravel() if len(sel) else np.zeros(0)
        out = _finish_optimal(ws, sel, x, y_sel, tol, iterations)
        if out.status == "feasible-optimal":
            return out
    return SdpSolution("indeterminate", None, None, None, None, None, None,
                       (np.inf, np.inf, np.inf), iterations, "cone solver returned unknown")


# ---------------------------------------------------------------------------
# POVM payoff maximization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PovmOptimum:
    value: float
    povm: tuple                 # PSD matrices resolving the identity
    dual: np.ndarray            # Hermitian Y >= N_k with Tr Y ~= value
    solution: SdpSolution = field(repr=False, default=None)


def povm_maximize(targets, tol: float = DEFAULT_TOL) -> PovmOptimum:
    """Maximize sum_k Tr(Pi_k N_k) over POVMs {Pi_k}.

    The optimum equals min { Tr Y : Y >= N_k for all k } by duality; the
    dual optimizer is returned alongside the POVM as a certificate.
    """
    mats = [require_hermitian(t, what=f"target {k}") for k, t in enumerate(targets)]
    if not mats:
        raise ValidationError("povm_maximize needs at least one target")
    d = mats[0].shape[0]
    for k, m in enumerate(mats):
        if m.shape[0] != d:
            raise ValidationError(f"target {k} dim {m.shape[0]} mismatches target 0 dim {d}")
    labels = [f"P{k}" for k in range(len(mats))]
    constraints = []
    for r in range(d * d):
        e = np.zeros(d * d)
        e[r] = 1.0
        basis = smat(e, d)
        constraints.append(
            Constraint({lab: basis for lab in labels}, float(np.trace(basis).real))
        )
    problem = SdpProblem(
        blocks=tuple((lab, d) for lab in labels),
        constraints=tuple(constraints),
        objective={lab: mats[k] for k, lab in enumerate(labels)},
        sense="maximize",
    )
    sol = solve(problem, tol=tol)
    if sol.status != "feasible-optimal":
        raise SdpIndeterminateError(
            f"povm_maximize did not reach the residual contract: {sol.status} ({sol.message})"
        )
    povm = [sol.blocks[lab] for lab in labels]
    # Exact identity resolution: spread the residual evenly (shifts each
    # eigenvalue by at most ||residual|| / K).
    resid = np.eye(d) - sum(povm)
    povm = tuple(p + resid / len(povm) for p in povm)
    y = np.asarray(sol.duals)
    dual = hermitize(smat(y, d))
    return PovmOptimum(float(sol.objective), povm, dual, sol)


class SdpIndeterminateError(RuntimeError):
    """An SDP finished without meeting the residual contract."""
