"""Identity-perturbation ellipsoid fitting for random Gaussian point clouds."""
__version__ = "0.1.0"

from .ellipsoid import (  # noqa: E402
    DeviationVector,
    EllipsoidFitter,
    FitResult,
    FitStatus,
    build_deviations,
    build_gram,
    fit_ellipsoid,
    least_norm_oracle,
    perturbation,
    solve_dual,
    verify,
)
from .linalg import EigPair, SymMatrix, cholesky_solve, extreme_eigenvalues, spectral_norm  # noqa: E402
from .sampling import PointCloud, derive_trial_seed, sample_cloud  # noqa: E402

__all__ = [
    "DeviationVector", "EigPair", "EllipsoidFitter", "FitResult", "FitStatus", "PointCloud",
    "SymMatrix", "build_deviations", "build_gram", "cholesky_solve", "derive_trial_seed",
    "extreme_eigenvalues", "fit_ellipsoid", "least_norm_oracle", "perturbation",
    "sample_cloud", "solve_dual", "spectral_norm", "verify",
]
