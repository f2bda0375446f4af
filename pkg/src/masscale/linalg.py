"""Dense symmetric linear algebra.

Factorizations, standard and generalized eigensolvers, low-rank-update
(Woodbury) solves and matrix-level bounds. Everything operates on plain
numpy arrays; symmetry is enforced at construction points with
:func:`symmetrize` and checked with :func:`require_symmetric`.

Dense factorizations and the standard symmetric eigensolver are delegated
to LAPACK (through numpy/scipy); the generalized solver performs the
explicit Cholesky reduction to standard form so that eigenvectors come out
B-orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NoConvergence, NotPositiveDefinite, SingularCore

__all__ = [
    "symmetrize",
    "require_symmetric",
    "MatrixPair",
    "EigDecomposition",
    "LowRankUpdate",
    "cholesky",
    "sym_eig",
    "generalized_eig",
    "generalized_eigvalues",
    "woodbury_solve",
    "gershgorin_max",
    "condition_number",
    "pair_condition",
]

_SYM_RTOL = 1e-12


def symmetrize(a):
    """Return the exactly symmetric part 0.5 * (A + A^T)."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def require_symmetric(a, name="matrix", rtol=1e-10):
    """Validate that ``a`` is square, finite and symmetric to ``rtol``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = np.abs(a).max() or 1.0
    if np.abs(a - a.T).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric")
    return a


@dataclass(frozen=True)
class MatrixPair:
    """Symmetric pair (A, B) with B positive definite."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = require_symmetric(self.a, "a")
        b = require_symmetric(self.b, "b")
        if a.shape != b.shape:
            raise ValueError("pair members must have the same order")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def order(self):
        return self.a.shape[0]


@dataclass(frozen=True)
class EigDecomposition:
    """Ascending eigenvalues and column eigenvectors.

    ``normalization`` is ``"unit"`` (2-norm) for standard problems or
    ``"b-orthonormal"`` for generalized ones (U^T B U = I).
    """

    values: np.ndarray
    vectors: np.ndarray
    normalization: str = "unit"

    @property
    def order(self):
        return len(self.values)


@dataclass(frozen=True)
class LowRankUpdate:
    """Implicit representation of base + V S V^T with diagonal core S."""

    base: np.ndarray  # SPD, dense (n, n) or diagonal as 1-D (n,)
    factors: np.ndarray  # (n, r)
    core: np.ndarray  # (r,) diagonal entries of S

    @property
    def order(self):
        return self.factors.shape[0]

    @property
    def rank(self):
        return self.factors.shape[1]

    def base_dense(self):
        b = np.asarray(self.base, dtype=float)
        return np.diag(b) if b.ndim == 1 else b

    def dense(self):
        """Materialize base + V S V^T as a dense symmetric matrix."""
        v = self.factors
        return symmetrize(self.base_dense() + (v * self.core) @ v.T)


def _fix_signs(vectors):
    """Make the largest-magnitude component of each eigenvector positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def cholesky(m):
    """Lower-triangular Cholesky factor of an SPD matrix.

    Raises :class:`NotPositiveDefinite` (with the first failing pivot index,
    0-based) if the matrix is not SPD within the pivot tolerance of LAPACK.
    """
    m = require_symmetric(m, "m")
    c, info = sla.lapack.dpotrf(m, lower=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    return np.tril(c)


def sym_eig(m):
    """Full spectrum of a dense symmetric matrix, ascending, orthonormal vectors."""
    m = require_symmetric(m, "m")
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise NoConvergence(-1, str(exc)) from exc
    return EigDecomposition(values, _fix_signs(vectors), "unit")


def _is_diagonal(a, rtol=1e-14):
    off = a - np.diag(np.diag(a))
    scale = np.abs(a).max() or 1.0
    return np.abs(off).max() <= rtol * scale


def generalized_eig(pair):
    """Solve A u = lambda B u via Cholesky reduction to standard form.

    Eigenvalues are real and ascending; eigenvectors are B-orthonormal.
    A diagonal B takes a fast scaling path instead of a triangular solve.
    """
    if not isinstance(pair, MatrixPair):
        pair = MatrixPair(*pair)
    a, b = pair.a, pair.b
    if _is_diagonal(b):
        d = np.diag(b).copy()
        bad = np.flatnonzero(d <= 0)
        if bad.size:
            raise NotPositiveDefinite(int(bad[0]))
        s = 1.0 / np.sqrt(d)
        c = symmetrize(a * s[:, None] * s[None, :])
        std = sym_eig(c)
        vectors = std.vectors * s[:, None]
    else:
        ell = cholesky(b)
        # C = L^{-1} A L^{-T}
        tmp = sla.solve_triangular(ell, a, lower=True)
        c = symmetrize(sla.solve_triangular(ell, tmp.T, lower=True))
        std = sym_eig(c)
        vectors = sla.solve_triangular(ell.T, std.vectors, lower=False)
    return EigDecomposition(std.values, _fix_signs(vectors), "b-orthonormal")


def generalized_eigvalues(pair):
    """Eigenvalues only of A u = lambda B u (faster than the full solve)."""
    if not isinstance(pair, MatrixPair):
        pair = MatrixPair(*pair)
    a, b = pair.a, pair.b
    if _is_diagonal(b):
        d = np.diag(b)
        bad = np.flatnonzero(d <= 0)
        if bad.size:
            raise NotPositiveDefinite(int(bad[0]))
        s = 1.0 / np.sqrt(d)
        return np.linalg.eigvalsh(symmetrize(a * s[:, None] * s[None, :]))
    return sla.eigh(a, b, eigvals_only=True)


def woodbury_solve(update, rhs):
    """Solve (base + V S V^T) x = rhs through the Woodbury identity.

    Cost is dominated by solves with the SPD base plus one dense r x r
    solve. Zero core entries are dropped (they contribute nothing).
    """
    rhs = np.asarray(rhs, dtype=float)
    base = np.asarray(update.base, dtype=float)
    if base.ndim == 1:
        d = base
        def base_solve(x):
            return (x.T / d).T
    else:
        ell = cholesky(base)
        def base_solve(x):
            y = sla.solve_triangular(ell, x, lower=True)
            return sla.solve_triangular(ell.T, y, lower=False)

    keep = np.flatnonzero(update.core != 0.0)
    if keep.size == 0:
        return base_solve(rhs)
    v = update.factors[:, keep]
    s = update.core[keep]

    y = base_solve(rhs)
    bv = base_solve(v)
    inner = np.diag(1.0 / s) + v.T @ bv
    try:
        coef = sla.solve(inner, v.T @ y, assume_a="sym")
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularCore(str(exc)) from exc
    if not np.all(np.isfinite(coef)):
        raise SingularCore("inner system produced non-finite solution")
    return y - bv @ coef


def gershgorin_max(m):
    """Max over rows of diagonal + sum of off-diagonal magnitudes (>= lambda_max)."""
    m = require_symmetric(m, "m")
    radii = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
    return float(np.max(np.diag(m) + radii))


def condition_number(m):
    """Spectral condition number lambda_max / lambda_min of an SPD matrix."""
    dec = sym_eig(m)
    lo, hi = dec.values[0], dec.values[-1]
    if lo <= 0:
        raise NotPositiveDefinite(0, "matrix has a nonpositive eigenvalue")
    return float(hi / lo)


def pair_condition(pair):
    """Spectral condition number lambda_max / lambda_min of an SPD pair."""
    dec = generalized_eig(pair)
    lo, hi = dec.values[0], dec.values[-1]
    if lo <= 0:
        raise NotPositiveDefinite(0, "pair has a nonpositive eigenvalue")
    return float(hi / lo)
