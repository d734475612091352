"""Identity-perturbation ellipsoid fitting.

For points ``G_i = r_i X_i`` the candidate matrix is ``Q = I + sum_i delta_i X_i X_i^T``.
Requiring ``<G_i, Q G_i> = 1`` for every point gives the square system
``M delta = eps`` with ``M_ij = <X_i, X_j>^2`` and ``eps_i = 1/r_i^2 - 1``.
The fit succeeds when that system is solvable and ``Q`` is positive
semidefinite.
"""
import enum
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    GramDegenerate,
    InstanceTooLarge,
    NotConverged,
    NotPositiveDefinite,
    ShapeMismatch,
)
from .linalg import CholeskyFactor, SymMatrix, extreme_eigenvalues, spectral_norm
from .sampling import PointCloud

MAX_GRAM_ORDER = 20_000
RESIDUAL_TOL = 1e-8
PSD_TOL = 1e-9
EIG_TOL = 1e-10


class FitStatus(str, enum.Enum):
    SUCCESS = "Success"
    GRAM_DEGENERATE = "GramDegenerate"
    NOT_PSD = "NotPSD"
    EIG_FAILED = "EigFailed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DeviationVector:
    values: np.ndarray

    @classmethod
    def from_norms(cls, norms):
        norms = np.asarray(norms, dtype=np.float64)
        return cls(1.0 / norms**2 - 1.0)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class FitResult:
    delta: np.ndarray
    max_residual: float
    q_min_eig: float
    perturbation_norm: float
    m_min_eig: float
    status: FitStatus
    q: np.ndarray = field(default=None, repr=False)
    deviations: DeviationVector = field(default=None, repr=False)
    gram: SymMatrix = field(default=None, repr=False)

    @property
    def success(self):
        return self.status is FitStatus.SUCCESS

    @property
    def eps_inf(self):
        if self.deviations is None:
            return float("nan")
        return float(np.max(np.abs(self.deviations.values)))

    @property
    def delta_inf(self):
        return float(np.max(np.abs(self.delta)))

    def summary(self):
        return {
            "status": str(self.status),
            "max_residual": self.max_residual,
            "q_min_eig": self.q_min_eig,
            "perturbation_norm": self.perturbation_norm,
            "m_min_eig": self.m_min_eig,
            "eps_inf": self.eps_inf,
            "delta_inf": self.delta_inf,
        }


def build_gram(cloud):
    """Squared-inner-product Gram matrix of the unit directions."""
    n = cloud.n
    if n > MAX_GRAM_ORDER:
        raise InstanceTooLarge(
            f"n = {n} exceeds the Gram matrix limit of {MAX_GRAM_ORDER} "
            f"(packed storage would need {n * (n + 1) * 4 / 1e9:.1f} GB)"
        )
    X = cloud.directions
    return SymMatrix.from_columns(n, lambda j: (X[j:] @ X[j]) ** 2)


def build_deviations(cloud):
    return DeviationVector.from_norms(cloud.norms)


def solve_dual(M, eps):
    """Dual weights ``delta`` with ``M delta = eps``.

    Raises GramDegenerate when the Cholesky factorization hits a vanishing
    pivot or the solution misses the backward-error bound.
    """
    values = eps.values if isinstance(eps, DeviationVector) else np.asarray(eps, dtype=np.float64)
    if values.shape != (M.order,):
        raise ShapeMismatch(f"Gram order {M.order} does not match {values.shape[0]} deviations")
    try:
        delta = CholeskyFactor(M).solve(values)
    except NotPositiveDefinite as exc:
        raise GramDegenerate(str(exc)) from exc
    resid = np.linalg.norm(M.matvec(delta) - values)
    bound = 1e-8 * (M.frobenius_norm() * np.linalg.norm(delta) + np.linalg.norm(values))
    if not np.isfinite(resid) or resid > bound:
        raise GramDegenerate(f"linear solve residual {resid:.3e} exceeds {bound:.3e}")
    return delta


def perturbation(cloud, delta):
    """``P = sum_i delta_i X_i X_i^T`` as a d x d SymMatrix."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (cloud.n,):
        raise ShapeMismatch(f"expected {cloud.n} weights, got {delta.shape}")
    X = cloud.directions
    P = (X.T * delta) @ X
    return SymMatrix.from_dense(0.5 * (P + P.T), check_symmetric=False)


def quadratic_forms(points, Q):
    points = np.asarray(points, dtype=np.float64)
    return np.einsum("ij,ij->i", points @ Q, points)


def max_constraint_residual(cloud, Q):
    return float(np.max(np.abs(quadratic_forms(cloud.points, Q) - 1.0)))


def fit_ellipsoid(cloud, eig_tol=EIG_TOL):
    """Run the construction on ``cloud`` and certify the result.

    Construction failures come back as a status on the FitResult rather than
    as exceptions.
    """
    n, d = cloud.n, cloud.d
    M = build_gram(cloud)
    eps = build_deviations(cloud)
    nan = float("nan")

    try:
        m_min_eig = extreme_eigenvalues(M, eig_tol).lambda_min
    except NotConverged:
        return FitResult(np.full(n, nan), float("inf"), nan, nan, nan,
                         FitStatus.EIG_FAILED, None, eps, M)

    try:
        delta = solve_dual(M, eps)
    except GramDegenerate:
        return FitResult(np.full(n, nan), float("inf"), nan, nan, m_min_eig,
                         FitStatus.GRAM_DEGENERATE, None, eps, M)

    P = perturbation(cloud, delta)
    Q = np.eye(d) + P.to_dense()
    max_residual = max_constraint_residual(cloud, Q)
    try:
        p_norm = spectral_norm(P, eig_tol)
        q_min = extreme_eigenvalues(SymMatrix.from_dense(Q, check_symmetric=False), eig_tol).lambda_min
    except NotConverged:
        return FitResult(delta, max_residual, nan, nan, m_min_eig,
                         FitStatus.EIG_FAILED, Q, eps, M)

    if not max_residual <= RESIDUAL_TOL:
        status = FitStatus.GRAM_DEGENERATE
    elif q_min < -PSD_TOL:
        status = FitStatus.NOT_PSD
    else:
        status = FitStatus.SUCCESS
    return FitResult(delta, max_residual, q_min, p_norm, m_min_eig, status, Q, eps, M)


def least_norm_oracle(cloud):
    """Minimizer of ``||Q - I||_F`` subject to ``<G_i, Q G_i> = 1``.

    Solves the full KKT system over all d^2 entries of ``Q`` with a generic
    dense solver. Meant for small instances only.
    """
    n, d = cloud.n, cloud.d
    if n > 200 or d > 30:
        raise InstanceTooLarge("the KKT oracle is limited to n <= 200 and d <= 30")
    G = cloud.points
    A = np.einsum("ni,nj->nij", G, G).reshape(n, d * d)
    if np.linalg.matrix_rank(A) < n:
        raise GramDegenerate("constraint matrices are linearly dependent")
    kkt = np.zeros((d * d + n, d * d + n))
    kkt[:d * d, :d * d] = np.eye(d * d)
    kkt[:d * d, d * d:] = A.T
    kkt[d * d:, :d * d] = A
    rhs = np.concatenate([np.eye(d).ravel(), np.ones(n)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise GramDegenerate(str(exc)) from exc
    return sol[:d * d].reshape(d, d)


def verify(cloud, Q, eig_tol=EIG_TOL):
    """Recompute ``(max_residual, min_eig)`` for a candidate ``Q`` from scratch."""
    if isinstance(Q, SymMatrix):
        Q = Q.to_dense()
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != (cloud.d, cloud.d):
        raise ShapeMismatch(f"Q must be {cloud.d} x {cloud.d}, got {Q.shape}")
    Qs = 0.5 * (Q + Q.T)
    residual = max_constraint_residual(cloud, Qs)
    min_eig = extreme_eigenvalues(SymMatrix.from_dense(Qs, check_symmetric=False), eig_tol).lambda_min
    return residual, min_eig


def certificates_pass(max_residual, min_eig):
    return max_residual <= RESIDUAL_TOL and min_eig >= -PSD_TOL


def save_q(path, Q):
    Q = np.asarray(Q, dtype=np.float64)
    with open(path, "w") as fh:
        json.dump({"d": int(Q.shape[0]), "q": Q.tolist()}, fh)


def load_q(path):
    with open(path) as fh:
        doc = json.load(fh)
    try:
        d = int(doc["d"])
        q = np.asarray(doc["q"], dtype=np.float64)
    except KeyError as exc:
        raise ValueError(f"Q document is missing field {exc.args[0]!r}") from None
    if q.shape != (d, d):
        raise ShapeMismatch(f"Q document declares d = {d} but holds shape {q.shape}")
    return q


class EllipsoidFitter(TransformerMixin, BaseEstimator):
    """Fit an origin-symmetric ellipsoid ``<x, Q x> = 1`` through the rows of X.

    Parameters
    ----------
    eig_tol : float
        Residual tolerance for the extreme-eigenvalue computations.

    Attributes
    ----------
    q_ : ndarray of shape (n_features, n_features)
    delta_ : ndarray of shape (n_samples,)
    status_ : FitStatus
    result_ : FitResult
    """

    def __init__(self, eig_tol=EIG_TOL):
        self.eig_tol = eig_tol

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2, dtype=np.float64)
        cloud = PointCloud.from_points(X)
        self.result_ = fit_ellipsoid(cloud, eig_tol=self.eig_tol)
        self.status_ = self.result_.status
        self.delta_ = self.result_.delta
        self.q_ = self.result_.q
        self.n_features_in_ = X.shape[1]
        return self

    def _check_q(self, X):
        check_is_fitted(self, "result_")
        if self.q_ is None:
            raise ValueError(f"fit did not produce a matrix (status {self.status_})")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeMismatch(
                f"X has {X.shape[1]} features, but the ellipsoid lives in R^{self.n_features_in_}"
            )
        return X

    def transform(self, X):
        """Quadratic form values ``<x, Q x>`` as a single column."""
        X = self._check_q(X)
        return quadratic_forms(X, self.q_)[:, None]

    def decision_function(self, X):
        X = self._check_q(X)
        return quadratic_forms(X, self.q_) - 1.0

    def score(self, X, y=None):
        return -float(np.max(np.abs(self.decision_function(X))))
