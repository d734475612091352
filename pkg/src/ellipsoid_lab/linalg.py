"""Dense symmetric kernels on packed lower-triangular storage.

Entries are stored column by column, lower triangle only (the LAPACK ``'L'``
packed layout), so an order-``n`` matrix holds ``n(n+1)/2`` doubles.
Factorization and matrix-vector products go through the LAPACK/BLAS packed
routines; extreme eigenvalues use Lanczos with full reorthogonalization.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas, eigh_tridiagonal, lapack

from .exceptions import NotConverged, NotPositiveDefinite, ShapeMismatch

PIVOT_RTOL = 1e-12
DENSE_CUTOFF = 64


def _column_offsets(n):
    j = np.arange(n, dtype=np.int64)
    return j * n - j * (j - 1) // 2


class SymMatrix:
    """Immutable real symmetric matrix in packed lower-triangular storage."""

    __slots__ = ("_order", "_packed")

    def __init__(self, order, packed):
        order = int(order)
        if order < 1:
            raise ValueError("order must be positive")
        packed = np.array(packed, dtype=np.float64, copy=True).ravel()
        if packed.size != order * (order + 1) // 2:
            raise ShapeMismatch(
                f"packed storage for order {order} needs {order * (order + 1) // 2} "
                f"values, got {packed.size}"
            )
        if not np.all(np.isfinite(packed)):
            raise ValueError("SymMatrix entries must be finite")
        packed.flags.writeable = False
        self._order = order
        self._packed = packed

    @classmethod
    def from_dense(cls, a, check_symmetric=True, rtol=1e-10):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeMismatch(f"expected a square matrix, got shape {a.shape}")
        if check_symmetric:
            scale = max(float(np.max(np.abs(a), initial=0.0)), 1.0)
            if not np.allclose(a, a.T, rtol=0.0, atol=rtol * scale):
                raise ValueError("matrix is not symmetric")
        return cls._from_lower(a)

    @classmethod
    def _from_lower(cls, a):
        n = a.shape[0]
        packed = np.empty(n * (n + 1) // 2)
        off = 0
        for j in range(n):
            packed[off:off + n - j] = a[j:, j]
            off += n - j
        return cls(n, packed)

    @classmethod
    def from_columns(cls, n, column):
        """Build from ``column(j)`` returning the lower part ``S[j:, j]``."""
        packed = np.empty(n * (n + 1) // 2)
        off = 0
        for j in range(n):
            packed[off:off + n - j] = column(j)
            off += n - j
        return cls(n, packed)

    @classmethod
    def identity(cls, n):
        packed = np.zeros(n * (n + 1) // 2)
        packed[_column_offsets(n)] = 1.0
        return cls(n, packed)

    @property
    def order(self):
        return self._order

    @property
    def packed(self):
        return self._packed

    @property
    def shape(self):
        return (self._order, self._order)

    def __getitem__(self, idx):
        i, j = idx
        n = self._order
        if i < 0:
            i += n
        if j < 0:
            j += n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(idx)
        if i < j:
            i, j = j, i
        return float(self._packed[j * n - j * (j - 1) // 2 + (i - j)])

    def diagonal(self):
        return self._packed[_column_offsets(self._order)].copy()

    def to_dense(self):
        n = self._order
        a = np.empty((n, n))
        off = 0
        for j in range(n):
            col = self._packed[off:off + n - j]
            a[j:, j] = col
            a[j, j:] = col
            off += n - j
        return a

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self._order,):
            raise ShapeMismatch(f"vector of length {self._order} expected, got {x.shape}")
        return blas.dspmv(self._order, 1.0, self._packed, x, lower=1)

    def __matmul__(self, x):
        return self.matvec(x)

    def frobenius_norm(self):
        diag = self._packed[_column_offsets(self._order)]
        total = 2.0 * np.dot(self._packed, self._packed) - np.dot(diag, diag)
        return float(np.sqrt(max(total, 0.0)))

    def __neg__(self):
        return SymMatrix(self._order, -self._packed)

    def __add__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        if other.order != self._order:
            raise ShapeMismatch("orders differ")
        return SymMatrix(self._order, self._packed + other._packed)

    def __sub__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self + (-other)

    def scaled(self, c):
        return SymMatrix(self._order, c * self._packed)

    def __repr__(self):
        return f"SymMatrix(order={self._order})"


@dataclass(frozen=True)
class EigPair:
    lambda_min: float
    lambda_max: float
    iterations: int
    converged: bool


class CholeskyFactor:
    """Packed Cholesky factor ``S = L L^T``, reusable across right-hand sides."""

    def __init__(self, S):
        n = S.order
        diag = S.diagonal()
        max_diag = float(np.max(diag))
        threshold = PIVOT_RTOL * max_diag
        if max_diag <= 0.0:
            raise NotPositiveDefinite(int(np.argmax(diag)), max_diag)
        ul, info = lapack.dpptrf(n, S.packed, lower=1)
        if info > 0:
            raise NotPositiveDefinite(info - 1)
        if info < 0:
            raise ValueError(f"dpptrf: illegal argument {-info}")
        pivots = ul[_column_offsets(n)] ** 2
        bad = np.flatnonzero(pivots <= threshold)
        if bad.size:
            raise NotPositiveDefinite(int(bad[0]), float(pivots[bad[0]]))
        self.order = n
        self._ul = ul

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        squeeze = b.ndim == 1
        rhs = b.reshape(self.order, -1) if squeeze else b
        if rhs.shape[0] != self.order:
            raise ShapeMismatch(f"right-hand side has {rhs.shape[0]} rows, expected {self.order}")
        x, info = lapack.dpptrs(self.order, self._ul, rhs, lower=1)
        if info != 0:
            raise ValueError(f"dpptrs: illegal argument {-info}")
        return x[:, 0].copy() if squeeze else x


def cholesky_solve(S, b):
    """Solve ``S x = b`` for symmetric positive definite ``S``.

    Raises NotPositiveDefinite when a pivot falls to ``1e-12`` times the
    largest diagonal entry or below. For several right-hand sides against one
    matrix, pass ``b`` as an ``(order, k)`` array or keep a CholeskyFactor.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != S.order:
        raise ShapeMismatch(f"S has order {S.order} but b has length {b.shape[0]}")
    return CholeskyFactor(S).solve(b)


def _lanczos(S, tol, max_iter, seed):
    n = S.order
    fro = S.frobenius_norm()
    target = tol * fro
    rng = np.random.default_rng(seed)

    cap = min(n, 64)
    Q = np.empty((n, cap))
    alpha = []
    beta = []

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    k = 0
    next_check = min(8, n)
    while True:
        if k == Q.shape[1]:
            Q = np.concatenate([Q, np.empty((n, min(n, 2 * cap) - cap))], axis=1)
            cap = Q.shape[1]
        Q[:, k] = q
        w = S.matvec(q)
        a = float(q @ w)
        w -= a * q
        if k > 0:
            w -= beta[-1] * Q[:, k - 1]
        basis = Q[:, :k + 1]
        for _ in range(2):
            w -= basis @ (basis.T @ w)
        b = float(np.linalg.norm(w))
        alpha.append(a)
        beta.append(b)
        k += 1

        exhausted = k == n
        breakdown = b <= 1e-14 * max(fro, 1.0)
        if k >= next_check or exhausted or breakdown or k >= max_iter:
            next_check = k + max(4, k // 8)
            vals, vecs = eigh_tridiagonal(np.array(alpha), np.array(beta[:-1]))
            lo, hi = vals[0], vals[-1]
            est = max(abs(b * vecs[-1, 0]), abs(b * vecs[-1, -1]))
            if est <= target or exhausted or breakdown:
                # confirm with the true residual of both Ritz pairs
                V = Q[:, :k] @ vecs[:, [0, -1]]
                r_lo = np.linalg.norm(S.matvec(V[:, 0]) - lo * V[:, 0])
                r_hi = np.linalg.norm(S.matvec(V[:, 1]) - hi * V[:, 1])
                if max(r_lo, r_hi) <= target or exhausted:
                    return EigPair(float(lo), float(hi), k, True)
            if k >= max_iter:
                raise NotConverged(k, est)
        if breakdown:
            # invariant subspace: restart orthogonally to the current basis
            w = rng.standard_normal(n)
            basis = Q[:, :k]
            for _ in range(2):
                w -= basis @ (basis.T @ w)
            beta[-1] = 0.0
            b = float(np.linalg.norm(w))
        q = w / b


def extreme_eigenvalues(S, tol=1e-10, max_iter=None, dense_cutoff=DENSE_CUTOFF, seed=0):
    """Smallest and largest eigenvalue of ``S``.

    Orders up to ``dense_cutoff`` use a full dense eigendecomposition. Larger
    matrices run Lanczos from a seeded start vector until both Ritz residuals
    satisfy ``||S v - lambda v|| <= tol * ||S||_F``; the default iteration
    cap is ``10 * order``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = S.order
    if n <= dense_cutoff:
        vals = np.linalg.eigvalsh(S.to_dense())
        return EigPair(float(vals[0]), float(vals[-1]), 0, True)
    if S.frobenius_norm() == 0.0:
        return EigPair(0.0, 0.0, 0, True)
    if max_iter is None:
        max_iter = 10 * n
    return _lanczos(S, tol, int(max_iter), seed)


def spectral_norm(S, tol=1e-10, **kwargs):
    pair = extreme_eigenvalues(S, tol, **kwargs)
    return max(abs(pair.lambda_min), abs(pair.lambda_max))
