"""Covariance matrices of the single-fix dead-reckoned estimators.

Formulas are written with 1-based window indices ``a, b = 1..N``; arrays are
0-based. For an epoch with phase ``d`` (odometer steps since the latest GPS
epoch), the backward estimator anchored on the ``a``-th fix at or before the
epoch has accumulated ``d + lam (a - 1)`` odometer errors, and two such
estimators share ``d + lam (min(a, b) - 1)`` of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NotSPDError
from .model import NoiseSpec


@dataclass(frozen=True)
class WindowSpec:
    """Window of ``N`` GPS fixes at phase ``d`` (``0 <= d <= lam``)."""

    N: int
    d: int
    lam: int
    noise: NoiseSpec

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError(f"window size N must be >= 1, got {self.N}")
        if self.lam < 1:
            raise ConfigurationError(f"lam must be >= 1, got {self.lam}")
        if not 0 <= self.d <= self.lam:
            raise ConfigurationError(f"phase d must lie in [0, {self.lam}], got {self.d}")


def build_A(N: int, d: int, lam: int) -> np.ndarray:
    """Integer matrix with entry ``(a, b) = d + lam (min(a, b) - 1)``."""
    idx = np.arange(N)
    return d + lam * np.minimum.outer(idx, idx)


def ones_matrix(N: int) -> np.ndarray:
    return np.ones((N, N), dtype=np.int64)


def delta_matrix(N: int) -> np.ndarray:
    """Entry ``(a, b) = min(a, b) - 1``."""
    idx = np.arange(N)
    return np.minimum.outer(idx, idx)


def corner_block(N: int, k: int) -> np.ndarray:
    """Ones on rows and columns strictly beyond ``k`` (1-based), zeros elsewhere."""
    C = np.zeros((N, N), dtype=np.int64)
    C[k:, k:] = 1
    return C


def build_sigma_minus(spec: WindowSpec) -> np.ndarray:
    """Covariance of the N backward estimators: ``s_gps^2 (I + r A_N(d))``."""
    noise = spec.noise
    return noise.var_gps * np.eye(spec.N) + noise.var_od * build_A(spec.N, spec.d, spec.lam)


def build_sigma_plus(spec: WindowSpec) -> np.ndarray:
    """Covariance of the N forward estimators: ``s_gps^2 (I + r A_N(lam - d))``."""
    noise = spec.noise
    return noise.var_gps * np.eye(spec.N) + noise.var_od * build_A(
        spec.N, spec.lam - spec.d, spec.lam
    )


def build_sigma_pp(spec: WindowSpec, n_forward: Optional[int] = None) -> np.ndarray:
    """Block-diagonal covariance of the stacked backward and forward estimators.

    ``n_forward`` overrides the forward block size (defaults to ``spec.N``),
    which is what the smoother needs near the end of a trace.
    """
    n_forward = spec.N if n_forward is None else n_forward
    lower = build_sigma_minus(spec)
    if n_forward == 0:
        return lower
    upper = build_sigma_plus(WindowSpec(n_forward, spec.d, spec.lam, spec.noise))
    return scipy.linalg.block_diag(lower, upper)


def spd_solve(M, rhs) -> np.ndarray:
    """Solve ``M v = rhs`` through a Cholesky factorization of ``M``.

    Raises:
        NotSPDError: when ``M`` is not numerically positive definite.
    """
    M = np.asarray(M, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotSPDError(f"matrix of order {M.shape[0]} is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, np.asarray(rhs, dtype=float))
