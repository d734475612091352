"""Empirical checks of the concentration events behind the construction.

Three per-trial events are reported:

* E1: the Gram matrix is well conditioned, ``||M^{-1}|| <= 3``;
* E2: every norm deviation is small, ``|eps_i| <= c2 * sqrt(log d / d)``;
* E3: every dual weight is small, ``|delta_i| <= c3 * log d / sqrt d``.

The constants ``c2`` and ``c3`` have no known values, so they are
configuration and the raw statistics are always reported next to the flags.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .ellipsoid import build_deviations, build_gram, fit_ellipsoid
from .exceptions import DimensionTooSmall, NotUnitVector
from .linalg import SymMatrix, _column_offsets, extreme_eigenvalues, spectral_norm
from .sampling import _rng, sample_directions, sample_gaussian

E1_MIN_EIG = 1.0 / 3.0
E1_TOL = 1e-9
TAIL_BAND = (1e-1, 1e-3)


def epsilon_moments(d):
    """Exact mean and variance of ``eps = 1/||G||^2 - 1`` for ``G ~ N(0, I_d/d)``."""
    if d < 5:
        raise DimensionTooSmall(f"the variance of eps is finite only for d >= 5, got {d}")
    mean = 2.0 / (d - 2)
    variance = 2.0 * d * d / ((d - 2) ** 2 * (d - 4))
    return mean, variance


def epsilon_tail_bound(t, d):
    """Sub-gaussian tail bound ``2 exp(-t^2 d / 32)``, valid for ``t <= 1/2``."""
    return 2.0 * np.exp(-np.square(t) * d / 32.0)


@dataclass(frozen=True)
class EventCutoffs:
    c2: float = 4.0
    c3: float = 4.0
    m_inv_max: float = 3.0

    def eps_cutoff(self, d):
        return self.c2 * np.sqrt(np.log(d) / d)

    def delta_cutoff(self, d):
        return self.c3 * np.log(d) / np.sqrt(d)


@dataclass(frozen=True)
class EventReport:
    e1_holds: bool
    m_min_eig: float
    m_inv_norm: float
    m_dev_norm: float
    e2_holds: bool
    eps_inf: float
    e3_holds: bool
    delta_inf: float
    thresholds_used: dict

    def to_dict(self):
        return asdict(self)


def expected_gram_deviation(M, d):
    """``M - E[M]`` where ``E[M] = (1 - 1/d) I + (1/d) J``, formed analytically."""
    n = M.order
    packed = M.packed - 1.0 / d
    diag = _column_offsets(n)
    packed[diag] = M.packed[diag] - 1.0
    return SymMatrix(n, packed)


def check_events(cloud, M, eps, delta, cutoffs=None, eig_tol=1e-10):
    cutoffs = cutoffs or EventCutoffs()
    d = cloud.d
    eps_values = getattr(eps, "values", eps)
    delta = np.asarray(delta, dtype=np.float64)

    m_min = extreme_eigenvalues(M, eig_tol).lambda_min
    m_inv = 1.0 / m_min if m_min > 0 else float("inf")
    m_dev = spectral_norm(expected_gram_deviation(M, d), eig_tol)

    eps_cut = cutoffs.eps_cutoff(d)
    delta_cut = cutoffs.delta_cutoff(d)
    eps_abs = np.abs(eps_values)
    delta_abs = np.abs(delta)
    return EventReport(
        e1_holds=bool(m_min >= 1.0 / cutoffs.m_inv_max - E1_TOL),
        m_min_eig=float(m_min),
        m_inv_norm=float(m_inv),
        m_dev_norm=float(m_dev),
        # conjunction of the per-point events
        e2_holds=bool(np.all(eps_abs <= eps_cut)),
        eps_inf=float(eps_abs.max()),
        e3_holds=bool(np.all(delta_abs <= delta_cut)),
        delta_inf=float(delta_abs.max()),
        thresholds_used={
            "m_inv_norm_max": cutoffs.m_inv_max,
            "eps_inf_max": float(eps_cut),
            "delta_inf_max": float(delta_cut),
            "c2": cutoffs.c2,
            "c3": cutoffs.c3,
        },
    )


@dataclass(frozen=True, eq=False)
class SplitResult:
    threshold_t0: float
    heavy_support: np.ndarray
    beta: np.ndarray = field(repr=False)
    light_norm_sq: float
    heavy_l1: float

    @property
    def beta_heavy(self):
        out = np.zeros_like(self.beta)
        out[self.heavy_support] = self.beta[self.heavy_support]
        return out

    @property
    def beta_light(self):
        return self.beta - self.beta_heavy


def split_weights(beta, t0):
    beta = np.asarray(beta, dtype=np.float64)
    heavy = np.flatnonzero(beta > t0)
    light = np.delete(beta, heavy)
    return SplitResult(
        threshold_t0=float(t0),
        heavy_support=heavy,
        beta=beta,
        light_norm_sq=float(np.sum(light * light)),
        heavy_l1=float(np.sum(beta[heavy])),
    )


def default_t0(d):
    return float(d) ** -0.25


def heavy_light_split(cloud, u, t0=0.0):
    """Split ``beta_i = <u, X_i>^2`` at ``t0``; ``t0 = 0`` selects ``d^{-1/4}``."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.shape != (cloud.d,):
        raise NotUnitVector(f"probe must live in R^{cloud.d}")
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise NotUnitVector(f"probe has norm {np.linalg.norm(u):.12f}")
    if t0 == 0:
        t0 = default_t0(cloud.d)
    if not 0.0 < t0 <= 1.0:
        raise ValueError(f"t0 must lie in (0, 1], got {t0}")
    beta = np.minimum((cloud.directions @ u) ** 2, 1.0)
    return split_weights(beta, t0)


@dataclass(frozen=True, eq=False)
class TailEstimate:
    sample_count: int
    thresholds: np.ndarray
    empirical_tail: np.ndarray
    fitted_psi1: float
    fitted_psi2: float
    d: int
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float

    @property
    def psi1_in_units_of_inv_d(self):
        return self.fitted_psi1 * self.d

    def binomial_stderr(self):
        p = self.empirical_tail
        return np.sqrt(p * (1.0 - p) / self.sample_count)

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items()}
        out["thresholds"] = self.thresholds.tolist()
        out["empirical_tail"] = self.empirical_tail.tolist()
        out["psi1_in_units_of_inv_d"] = self.psi1_in_units_of_inv_d
        return out


def _slope(x, y):
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def fit_tail_scales(abs_dev, band=TAIL_BAND, levels=20):
    """Scale parameters ``a1, a2`` of ``P(|Z| >= t) ~ exp(-t/a1)`` and ``exp(-t^2/a2^2)``.

    Fitted by least squares of ``-log p`` against the ``1 - p`` quantile (or
    its square) for survival levels ``p`` spread log-uniformly over ``band``.
    """
    abs_dev = np.sort(np.asarray(abs_dev, dtype=np.float64))
    if abs_dev[-1] <= 1e-12:
        return 0.0, 0.0
    p = np.logspace(np.log10(band[0]), np.log10(band[1]), levels)
    t = np.quantile(abs_dev, 1.0 - p)
    y = -np.log(p)
    s1 = _slope(t, y)
    s2 = _slope(t * t, y)
    psi1 = 1.0 / s1 if s1 > 0 else float("inf")
    psi2 = 1.0 / np.sqrt(s2) if s2 > 0 else float("inf")
    return psi1, psi2


def survival(abs_dev, thresholds):
    """Empirical ``P(|Z| >= t)``; non-increasing in ``t`` by construction."""
    srt = np.sort(abs_dev)
    return (srt.size - np.searchsorted(srt, thresholds, side="left")) / srt.size


def _tail_estimate(values, centre, d, thresholds):
    values = np.asarray(values, dtype=np.float64)
    N = values.size
    dev = values - centre
    abs_dev = np.abs(dev)
    if thresholds is None:
        top = float(np.quantile(abs_dev, 1.0 - TAIL_BAND[1]))
        top = top if top > 1e-12 else 1.0
        thresholds = np.linspace(0.0, top, 25)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    psi1, psi2 = fit_tail_scales(abs_dev)

    mean = float(np.mean(values))
    central = values - mean
    var = float(np.mean(central**2)) * N / (N - 1)
    m4 = float(np.mean(central**4))
    return TailEstimate(
        sample_count=N,
        thresholds=thresholds,
        empirical_tail=survival(abs_dev, thresholds),
        fitted_psi1=psi1,
        fitted_psi2=psi2,
        d=int(d),
        mean=mean,
        variance=var,
        mean_stderr=float(np.sqrt(var / N)),
        variance_stderr=float(np.sqrt(max(m4 - var * var, 0.0) / N)),
    )


def _chunks(total, size):
    done = 0
    while done < total:
        step = min(size, total - done)
        yield step
        done += step


def _probe_matrix(probe, d):
    A = np.asarray(probe, dtype=np.float64).reshape(d, d)
    if abs(np.linalg.norm(A) - 1.0) > 1e-10:
        raise NotUnitVector(f"probe has Frobenius norm {np.linalg.norm(A):.12f}")
    return A


def pair_probe(d, i=0, j=1):
    """``(e_i (x) e_j + e_j (x) e_i) / sqrt 2`` flattened to length d^2."""
    A = np.zeros((d, d))
    A[i, j] = A[j, i] = 1.0 / np.sqrt(2.0)
    return A.ravel()


def tensor_tail(d, samples, probe, seed, chunk=8192):
    """Tail of ``<X (x) X - E[X (x) X], u>`` for ``X`` uniform on the sphere.

    The probe ``u`` is handled as the d x d matrix ``A`` and the statistic is
    ``X^T A X - tr(A)/d``; no d^2-vectors are formed.
    """
    if samples < 10_000:
        raise ValueError("tensor_tail needs at least 10^4 samples")
    A = _probe_matrix(probe, d)
    A = 0.5 * (A + A.T)
    rng = _rng(seed)
    stats = np.empty(samples)
    off = 0
    for m in _chunks(samples, chunk):
        X = sample_directions(d, m, rng)
        stats[off:off + m] = np.einsum("ij,ij->i", X @ A, X)
        off += m
    return _tail_estimate(stats, np.trace(A) / d, d, None)


def sample_epsilon(d, samples, seed, chunk=8192):
    rng = _rng(seed)
    out = np.empty(samples)
    off = 0
    for m in _chunks(samples, chunk):
        G = sample_gaussian(d, m, rng)
        out[off:off + m] = 1.0 / np.einsum("ij,ij->i", G, G) - 1.0
        off += m
    return out


DEFAULT_EPS_THRESHOLDS = np.round(np.arange(1, 11) * 0.05, 10)


def epsilon_tail(d, samples, seed, thresholds=None):
    """Tail of ``|eps - E eps|`` from freshly drawn Gaussian norms."""
    if d < 5:
        raise DimensionTooSmall(f"d must be at least 5, got {d}")
    if samples < 10_000:
        raise ValueError("epsilon_tail needs at least 10^4 samples")
    if thresholds is None:
        thresholds = DEFAULT_EPS_THRESHOLDS
    mean, _ = epsilon_moments(d)
    return _tail_estimate(sample_epsilon(d, samples, seed), mean, d, thresholds)


@dataclass(frozen=True)
class DiagnosticsReport:
    d: int
    n: int
    seed: int
    fit: dict
    events: EventReport
    epsilon_moments: dict
    epsilon_tail: TailEstimate
    tensor_tail: TailEstimate

    def to_dict(self):
        return {
            "d": self.d,
            "n": self.n,
            "seed": self.seed,
            "fit": self.fit,
            "events": self.events.to_dict(),
            "epsilon_moments": self.epsilon_moments,
            "epsilon_tail": self.epsilon_tail.to_dict(),
            "tensor_tail": self.tensor_tail.to_dict(),
        }


def diagnose(cloud, cutoffs=None, tail_samples=20_000):
    """Fit ``cloud``, evaluate E1/E2/E3 and run both tail estimators at its dimension."""
    result = fit_ellipsoid(cloud)
    M = result.gram if result.gram is not None else build_gram(cloud)
    eps = result.deviations if result.deviations is not None else build_deviations(cloud)
    events = check_events(cloud, M, eps, result.delta, cutoffs)
    mean, var = epsilon_moments(cloud.d)
    return DiagnosticsReport(
        d=cloud.d,
        n=cloud.n,
        seed=int(cloud.seed),
        fit=result.summary(),
        events=events,
        epsilon_moments={"mean": mean, "variance": var},
        epsilon_tail=epsilon_tail(cloud.d, tail_samples, cloud.seed ^ 0x5EED),
        tensor_tail=tensor_tail(cloud.d, tail_samples, pair_probe(cloud.d), cloud.seed ^ 0x7E45),
    )
