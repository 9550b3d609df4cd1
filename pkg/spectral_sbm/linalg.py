"""
Dense Symmetric Linear Algebra
==============================

Eigendecomposition, overflow-safe matrix powering, eigenspace projection and
row/spectral norms for the dense symmetric matrices used throughout the
package (adjacency A, centered B, structure L, noise R and their powers).

Powers such as B^r with r ~ ln n overflow float64 long before n reaches a
few thousand, so powered matrices are carried as a unit-scale base plus a
natural-log scale factor and every comparison against a threshold happens
in log domain.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from spectral_sbm.config import (
    EIGEN_RESIDUAL_TOL,
    JACOBI_MAX_N,
    JACOBI_MAX_SWEEPS,
    JACOBI_TOL,
    POWER_ITER_MAX,
    SPECTRAL_NORM_TOL,
)
from spectral_sbm.errors import ConvergenceError, ParameterError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# Dense n x n float64 array with exact symmetry.
SymMatrix = np.ndarray


def as_symmetric(m, name: str = "m") -> SymMatrix:
    """
    Validate and return ``m`` as a float64 symmetric matrix.

    A scalar or 1x1 input is accepted as the n = 1 case.

    Raises:
        ParameterError: if ``m`` is not square, is empty or is not exactly symmetric.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ParameterError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ParameterError(f"{name} is not symmetric")
    return a


###############################################################################
#                              EIGENDECOMPOSITION                             #
###############################################################################
@dataclass(frozen=True)
class EigenDecomposition:
    """
    Full eigendecomposition, eigenvalues in descending algebraic order.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return int(self.eigenvalues.shape[0])

    def top(self, k: int) -> np.ndarray:
        """Columns spanning the top-k eigenspace."""
        _check_rank(k, self.n)
        return self.eigenvectors[:, :k]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _check_rank(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise ParameterError(f"k must satisfy 1 <= k <= n={n}, got {k}")


def _check_residuals(a: np.ndarray, values: np.ndarray, vectors: np.ndarray,
                     tol: float, name: str) -> None:
    residuals = np.linalg.norm(a @ vectors - vectors * values, axis=0)
    bounds = tol * (1.0 + np.abs(values))
    worst = int(np.argmax(residuals - bounds))
    if residuals[worst] > bounds[worst]:
        raise ConvergenceError(
            name, float(residuals[worst]),
            f"eigenpair {worst} misses tolerance {bounds[worst]:.3e}",
        )


def sym_eigen(m, tol: float = EIGEN_RESIDUAL_TOL, method: str = "eigh",
              name: str = "m") -> EigenDecomposition:
    """
    Eigendecomposition of a symmetric matrix.

    Args:
        m: Symmetric matrix.
        tol: Residual tolerance; every pair must satisfy
            ||m v - lambda v|| <= tol * (1 + |lambda|).
        method: ``"eigh"`` (LAPACK via scipy) or ``"jacobi"`` (cyclic Jacobi, n <= 64).
        name: Matrix name used in error messages.

    Returns:
        EigenDecomposition sorted by descending algebraic eigenvalue.

    Raises:
        ConvergenceError: if any eigenpair misses the residual tolerance.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    a = as_symmetric(m, name)
    if method == "jacobi":
        return jacobi_eigen(a, name=name, residual_tol=tol)
    if method != "eigh":
        raise ParameterError(f"unknown eigen method '{method}'")

    values, vectors = scipy.linalg.eigh(a)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    _check_residuals(a, values, vectors, tol, name)
    return EigenDecomposition(values, vectors)


def jacobi_eigen(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
                 name: str = "m", residual_tol: float = EIGEN_RESIDUAL_TOL) -> EigenDecomposition:
    """
    Cyclic Jacobi eigensolver for small matrices.

    Sweeps every (p, q) pair with a rotation that zeroes a[p, q] until the
    off-diagonal Frobenius norm drops below ``tol * ||m||_F``.
    """
    a = as_symmetric(m, name).copy()
    n = a.shape[0]
    if n > JACOBI_MAX_N:
        raise ParameterError(f"jacobi_eigen supports n <= {JACOBI_MAX_N}, got {n}")

    v = np.eye(n)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    off = 0.0
    converged = False
    for sweep in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= tol * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    if not converged:
        raise ConvergenceError(name, off / scale, f"Jacobi stalled after {max_sweeps} sweeps")

    order = np.argsort(-np.diag(a), kind="stable")
    values = np.diag(a)[order].copy()
    vectors = v[:, order].copy()
    _check_residuals(as_symmetric(m, name), values, vectors, residual_tol, name)
    logger.debug("jacobi converged for %s (n=%d) after %d sweeps", name, n, sweep)
    return EigenDecomposition(values, vectors)


###############################################################################
#                               SCALED POWERING                               #
###############################################################################
@dataclass(frozen=True)
class ScaledMatrix:
    """
    Matrix held as ``exp(log_scale) * base``.

    ``base`` has its max-abs entry in [0.5, 1) unless it is the zero matrix.
    """
    base: np.ndarray
    log_scale: float

    @classmethod
    def from_dense(cls, m) -> "ScaledMatrix":
        base, exp2 = _normalize(np.asarray(m, dtype=float))
        return cls(base, exp2 * LN2)

    @classmethod
    def identity(cls, n: int) -> "ScaledMatrix":
        return cls.from_dense(np.eye(n))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.base)

    def log_max_abs(self) -> float:
        peak = float(np.max(np.abs(self.base)))
        return self.log_scale + math.log(peak) if peak > 0 else -math.inf

    def to_dense(self) -> np.ndarray:
        """Materialize the represented matrix; may overflow for large scales."""
        exp2 = self.log_scale / LN2
        if abs(exp2 - round(exp2)) < 1e-9 and abs(exp2) < 1000:
            # power-of-two scales restore bit-exactly
            return np.ldexp(self.base, int(round(exp2)))
        with np.errstate(over="ignore", invalid="ignore"):
            return self.base * np.exp(self.log_scale)

    def rescaled(self, log_ref: float) -> np.ndarray:
        """The represented matrix divided by exp(log_ref)."""
        if self.is_zero:
            return np.zeros_like(self.base)
        return self.base * math.exp(self.log_scale - log_ref)


@dataclass(frozen=True)
class ScaledPower(ScaledMatrix):
    """m^r held as a ScaledMatrix, remembering the exponent."""
    exponent: int = 1


def _normalize(m: np.ndarray) -> Tuple[np.ndarray, int]:
    """Exact power-of-two rescale bringing max|m| into [0.5, 1)."""
    peak = float(np.max(np.abs(m))) if m.size else 0.0
    if peak == 0.0 or not math.isfinite(peak):
        return m, 0
    _, exp2 = math.frexp(peak)
    return np.ldexp(m, -exp2), exp2


def _as_scaled(factor: Union[np.ndarray, ScaledMatrix]) -> ScaledMatrix:
    if isinstance(factor, ScaledMatrix):
        return factor
    return ScaledMatrix.from_dense(factor)


def scaled_product(factors: Sequence[Union[np.ndarray, ScaledMatrix]]) -> ScaledMatrix:
    """
    Left-to-right product of matrices with renormalization after each step.

    Factors need not be symmetric or square as long as shapes chain.
    """
    if not factors:
        raise ParameterError("scaled_product needs at least one factor")
    first = _as_scaled(factors[0])
    acc, log_scale = first.base, first.log_scale
    for factor in factors[1:]:
        nxt = _as_scaled(factor)
        if acc.shape[1] != nxt.base.shape[0]:
            raise ParameterError(f"shape mismatch {acc.shape} x {nxt.base.shape}")
        acc, exp2 = _normalize(acc @ nxt.base)
        log_scale += nxt.log_scale + exp2 * LN2
    if not np.any(acc):
        log_scale = 0.0
    return ScaledMatrix(acc, log_scale)


def scaled_sum(terms: Sequence[ScaledMatrix]) -> ScaledMatrix:
    """Sum of scaled matrices evaluated at the largest non-zero scale."""
    live = [t for t in terms if not t.is_zero]
    if not live:
        return ScaledMatrix(np.zeros_like(terms[0].base), 0.0)
    ref = max(t.log_scale for t in live)
    total = sum(t.rescaled(ref) for t in live)
    base, exp2 = _normalize(total)
    return ScaledMatrix(base, ref + exp2 * LN2 if np.any(base) else 0.0)


def scaled_power(m, r: int) -> ScaledPower:
    """
    m^r by repeated multiplication, renormalizing after every step.

    Args:
        m: Symmetric matrix.
        r: Exponent, r >= 1.

    Returns:
        ScaledPower whose base is symmetrized once at the end.
    """
    if r < 1:
        raise ParameterError(f"power exponent must be >= 1, got {r}")
    a = as_symmetric(m)
    unit, exp0 = _normalize(a)
    acc, log_scale = unit, exp0 * LN2
    for _ in range(r - 1):
        acc, exp2 = _normalize(acc @ unit)
        log_scale += (exp0 + exp2) * LN2
    acc = 0.5 * (acc + acc.T)
    if not np.any(acc):
        log_scale = 0.0
    return ScaledPower(acc, log_scale, r)


###############################################################################
#                              DISTANCES & NORMS                              #
###############################################################################
class LogDistance(NamedTuple):
    """Distance equal to ``exp(log_scale) * unit``."""
    log_scale: float
    unit: float

    @property
    def log_value(self) -> float:
        return self.log_scale + math.log(self.unit) if self.unit > 0 else -math.inf

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.unit > 0 else 0.0


def row_distance(p: ScaledMatrix, i: int, j: int) -> LogDistance:
    """||row_i - row_j||_2 of the represented matrix, split into scale and unit part."""
    n = p.base.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise ParameterError(f"row index out of range for n={n}: ({i}, {j})")
    unit = float(np.linalg.norm(p.base[i] - p.base[j]))
    return LogDistance(p.log_scale, unit)


def pairwise_row_distances(p: Union[ScaledMatrix, np.ndarray]) -> Tuple[float, np.ndarray]:
    """All row distances at once: (log_scale, n x n unit-scale distance matrix)."""
    if isinstance(p, ScaledMatrix):
        base, log_scale = p.base, p.log_scale
    else:
        base, log_scale = np.asarray(p, dtype=float), 0.0
    if base.shape[0] == 1:
        return log_scale, np.zeros((1, 1))
    return log_scale, squareform(pdist(base, metric="euclidean"))


def project_topk(decomp: EigenDecomposition, k: int, u) -> np.ndarray:
    """
    Orthogonal projection onto the span of the top-k eigenvectors.

    ``u`` may be a vector or a matrix whose columns are projected independently.
    """
    _check_rank(k, decomp.n)
    u = np.asarray(u, dtype=float)
    if u.shape[0] != decomp.n:
        raise ParameterError(f"vector length {u.shape[0]} does not match n={decomp.n}")
    v = decomp.eigenvectors[:, :k]
    return v @ (v.T @ u)


def spectral_norm(m, tol: float = SPECTRAL_NORM_TOL, method: str = "eigen",
                  name: str = "m") -> float:
    """
    max |lambda_i| of a symmetric matrix.

    ``method="power"`` runs power iteration on m^2 from a fixed start vector;
    ``method="eigen"`` reads the extreme eigenvalues directly.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    a = as_symmetric(m, name)
    n = a.shape[0]
    if method == "eigen":
        values = scipy.linalg.eigvalsh(a)
        return float(max(abs(values[0]), abs(values[-1])))
    if method != "power":
        raise ParameterError(f"unknown spectral norm method '{method}'")

    if not np.any(a):
        return 0.0
    x = 1.0 / np.arange(1, n + 1, dtype=float)
    x /= np.linalg.norm(x)
    estimate = 0.0
    change = math.inf
    for _ in range(POWER_ITER_MAX):
        y = a @ x
        z = a @ y
        nxt = math.sqrt(abs(float(x @ z)))
        norm_z = float(np.linalg.norm(z))
        if norm_z == 0.0:
            return nxt
        x = z / norm_z
        change = abs(nxt - estimate)
        if change <= tol * nxt:
            return nxt
        estimate = nxt
    raise ConvergenceError(name, change, f"power iteration hit {POWER_ITER_MAX} steps")


def max_row_norm(m) -> float:
    """max_i ||row_i||_2."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return float(np.max(np.linalg.norm(a, axis=1)))
