"""Dense complex linear algebra primitives shared by the whole toolkit.

Matrices are plain ``numpy.ndarray`` objects with complex dtype, stored
row-major.  All operators met in practice are small (at most 16 x 16), so
everything here is dense and eager.  Hermitian inputs are accepted up to a
relative tolerance of 1e-12 and symmetrized before use; anything further
from Hermitian is rejected.

Complex numbers serialize to JSON as two-element ``[re, im]`` arrays and
matrices as row-major nested arrays of those pairs; every module reuses
this format.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-12


class ValidationError(ValueError):
    """An input violated one of the documented invariants.

    The message names the invariant and the measured residual.
    """


class EigenConvergenceError(RuntimeError):
    """The eigensolver failed to converge."""


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-d complex ndarray and reject non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValidationError(f"expected a matrix, got array of ndim {a.ndim}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValidationError("matrix entries must be finite (found NaN/Inf)")
    return a


def hermitize(m: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (M + M†)/2."""
    return (m + m.conj().T) / 2


def hermiticity_defect(m: np.ndarray) -> float:
    """Max-entry deviation from Hermiticity, relative to max |entry|."""
    scale = max(np.abs(m).max(), 1.0) if m.size else 1.0
    return float(np.abs(m - m.conj().T).max() / scale) if m.size else 0.0


def require_hermitian(m, tol: float = HERMITICITY_TOL, what: str = "matrix") -> np.ndarray:
    """Validate Hermiticity within ``tol`` (relative) and return the symmetrized copy."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{what} must be square, got shape {a.shape}")
    defect = hermiticity_defect(a)
    if defect > tol:
        raise ValidationError(
            f"{what} is not Hermitian: relative defect {defect:.3e} exceeds {tol:.1e}"
        )
    return hermitize(a)


def hermitian_eig(h, tol: float = HERMITICITY_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues real and
    ascending and eigenvectors unitary (columns), so that
    ``H = V diag(w) V†`` holds to ~1e-10 relative Frobenius error.
    """
    a = require_hermitian(h, tol=tol, what="hermitian_eig input")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        raise EigenConvergenceError(f"eigensolver did not converge: {exc}") from exc
    return w, v


def kron(a, b) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(as_matrix(a), as_matrix(b))


def _require_bipartite(m, dims):
    a = as_matrix(m)
    d1, d2 = int(dims[0]), int(dims[1])
    if d1 < 1 or d2 < 1:
        raise ValidationError(f"subsystem dimensions must be positive, got {dims}")
    n = d1 * d2
    if a.shape != (n, n):
        raise ValidationError(
            f"matrix shape {a.shape} does not match dims {d1}x{d2} (expected {n}x{n})"
        )
    return a, d1, d2


def partial_trace(m, dims, keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``dims = (d1, d2)`` splits the matrix as subsystem 1 (x) subsystem 2;
    ``keep`` is 1-based: ``keep=1`` returns the d1 x d1 reduction.
    """
    a, d1, d2 = _require_bipartite(m, dims)
    t = a.reshape(d1, d2, d1, d2)
    if keep == 1:
        return np.trace(t, axis1=1, axis2=3)
    if keep == 2:
        return np.trace(t, axis1=0, axis2=2)
    raise ValidationError(f"keep must be 1 or 2, got {keep}")


def partial_transpose(m, dims, which: int) -> np.ndarray:
    """Transpose one factor of a bipartite operator in the product basis.

    Involutive; applying it to both factors gives the full transpose.
    """
    a, d1, d2 = _require_bipartite(m, dims)
    t = a.reshape(d1, d2, d1, d2)
    if which == 1:
        t = t.transpose(2, 1, 0, 3)
    elif which == 2:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValidationError(f"which must be 1 or 2, got {which}")
    return t.reshape(d1 * d2, d1 * d2)


def permute_subsystems(m, dims, perm) -> np.ndarray:
    """Reorder the tensor factors of an operator.

    ``perm[i]`` is the old position of the factor that ends up at new
    position ``i`` (0-based).  Index formula: the entry at row multi-index
    (r_{perm[0]},...,r_{perm[n-1]}) of the result equals the entry at
    (r_0,...,r_{n-1}) of the input.
    """
    a = as_matrix(m)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if a.shape != (n, n):
        raise ValidationError(f"matrix shape {a.shape} does not match dims {dims}")
    if sorted(perm) != list(range(len(dims))):
        raise ValidationError(f"perm {perm} is not a permutation of 0..{len(dims) - 1}")
    k = len(dims)
    t = a.reshape(dims + dims)
    axes = list(perm) + [p + k for p in perm]
    new_dims = [dims[p] for p in perm]
    return t.transpose(axes).reshape(int(np.prod(new_dims)), -1)


def trace_norm(m) -> float:
    """Sum of singular values; for Hermitian input, sum of |eigenvalues|."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"trace_norm expects a square matrix, got {a.shape}")
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False).sum())


# ---------------------------------------------------------------------------
# JSON wire format: complex -> [re, im], matrix -> row-major nested arrays.
# ---------------------------------------------------------------------------

def matrix_to_json(m) -> list:
    a = as_matrix(m)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def matrix_from_json(data) -> np.ndarray:
    """Parse the nested-array matrix format; rejects ragged or malformed input."""
    if not isinstance(data, list) or not data:
        raise ValidationError("matrix JSON must be a non-empty nested array")
    rows = []
    width = None
    for row in data:
        if not isinstance(row, list) or (width is not None and len(row) != width):
            raise ValidationError("matrix JSON rows must be lists of equal length")
        width = len(row)
        parsed = []
        for entry in row:
            if not (isinstance(entry, list) and len(entry) == 2):
                raise ValidationError(
                    "matrix entries must be [re, im] pairs, got %r" % (entry,)
                )
            parsed.append(complex(float(entry[0]), float(entry[1])))
        rows.append(parsed)
    return as_matrix(np.array(rows, dtype=complex))
