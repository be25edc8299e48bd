"""Regularized Gaussian process regression with an RKHS confidence envelope.

Given N observations ``y_i`` of an unknown function at points ``x_i`` and a
positive-definite kernel ``k``, the posterior mean and variance are::

    mu(x)    = k_N(x)^T (K + lam*I)^{-1} y
    sigma(x) = k(x, x) - k_N(x)^T (K + lam*I)^{-1} k_N(x)

with ``k_N(x) = [k(x, x_i)]_i``, ``K = [k(x_i, x_j)]_ij`` and the fixed
regularizer ``lam = 1 + 2/N``.  Note that ``sigma`` here is the posterior
kernel diagonal (a variance, not a standard deviation); the confidence
envelope below scales it directly, which is the literal form used by the
upper-bound guarantee this package implements.  A ``sigma_mode`` switch on
:class:`ConfidenceParams` selects the conventional square-root variant for
comparison studies.

For a target function with RKHS norm at most B and R-sub-Gaussian
observation noise, with probability at least 1 - delta::

    |mu(x) - f(x)| <= (B + R*sqrt(2*ln(sqrt(det(lam*I + K))/delta))) * sigma(x)

for all x.  :func:`confidence_multiplier` evaluates the parenthesized factor
from the cached Cholesky factorization; :func:`upper_bound` assembles
``mu(x) + multiplier * sigma(x)``.

The posterior caches a lower-triangular Cholesky factor of ``K + lam*I``,
so mean queries are O(N) and variance queries O(N^2) after an O(N^3) fit.
No hyperparameter optimization is performed; kernel parameters are explicit
user configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
from scipy import linalg

__all__ = [
    "NumericalError",
    "SquaredExponentialKernel",
    "GpDataset",
    "GpPosterior",
    "ConfidenceParams",
    "kernel_eval",
    "fit",
    "mean",
    "variance",
    "confidence_multiplier",
    "upper_bound",
    "posterior_to_dict",
    "posterior_from_dict",
    "save_posterior",
    "load_posterior",
]

# Jitter added to the diagonal before declaring a factorization failure.
# lam >= 1 makes failure essentially impossible; the ladder guards
# pathological user-supplied data.
_JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

SigmaMode = Literal["variance", "stddev"]


class NumericalError(RuntimeError):
    """Raised when a factorization or a posterior query fails numerically."""


@dataclass(frozen=True)
class SquaredExponentialKernel:
    """k(x, x') = signal_variance * exp(-||x - x'||^2 / (2 * length_scale^2))."""

    length_scale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self) -> None:
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")

    def __call__(self, x: np.ndarray, y: np.ndarray) -> float:
        return kernel_eval(self, x, y)

    def cross(self, points: np.ndarray, queries: np.ndarray) -> np.ndarray:
        """Cross-kernel matrix of shape (n_queries, n_points)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if points.shape[1] != queries.shape[1]:
            raise ValueError(
                f"dimension mismatch: points have dim {points.shape[1]}, "
                f"queries have dim {queries.shape[1]}"
            )
        d2 = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        return self.signal_variance * np.exp(-d2 / (2.0 * self.length_scale**2))

    def gram(self, points: np.ndarray) -> np.ndarray:
        """Gram matrix K = [k(x_i, x_j)]; symmetric by construction."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.cross(points, points)
        return (k + k.T) / 2.0


def kernel_eval(kernel: SquaredExponentialKernel, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate the kernel at a single pair of equal-dimension vectors."""
    xa = np.asarray(x, dtype=float).ravel()
    ya = np.asarray(y, dtype=float).ravel()
    if xa.shape != ya.shape:
        raise ValueError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    d2 = float(((xa - ya) ** 2).sum())
    return kernel.signal_variance * math.exp(-d2 / (2.0 * kernel.length_scale**2))


@dataclass(frozen=True, eq=False)
class GpDataset:
    """Training points (N, dim) and scalar targets (N,)."""

    points: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 0)
        pts = np.atleast_2d(pts)
        tgt = np.asarray(self.targets, dtype=float).ravel()
        if pts.shape[0] != tgt.shape[0]:
            raise ValueError(
                f"got {pts.shape[0]} points but {tgt.shape[0]} targets"
            )
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if tgt.size and not np.all(np.isfinite(tgt)):
            raise ValueError("targets must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", tgt)

    @property
    def count(self) -> int:
        return int(self.targets.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass(frozen=True)
class ConfidenceParams:
    """Parameters of the confidence envelope.

    ``rkhs_bound`` is the assumed RKHS norm bound B of the target function
    (no estimation procedure is provided; it is user configuration).
    ``noise_scale`` is the sub-Gaussian noise scale R, and ``conf_delta``
    the failure probability delta of the envelope.  ``sigma_mode`` selects
    whether the multiplier scales the posterior variance (default, the
    literal form) or its square root.
    """

    rkhs_bound: float
    noise_scale: float = 0.0
    conf_delta: float = 0.05
    sigma_mode: SigmaMode = "variance"

    def __post_init__(self) -> None:
        if not self.rkhs_bound > 0:
            raise ValueError(f"rkhs_bound must be positive, got {self.rkhs_bound}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")
        if not 0.0 < self.conf_delta < 1.0:
            raise ValueError(f"conf_delta must be in (0, 1), got {self.conf_delta}")
        if self.sigma_mode not in ("variance", "stddev"):
            raise ValueError(f"unknown sigma_mode: {self.sigma_mode}")


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """Fitted posterior with cached Cholesky factorization.

    Immutable after :func:`fit`; concurrent read queries are safe.  For an
    empty dataset the prior convention applies: mean 0 and variance
    k(x, x) everywhere, with no factorization.
    """

    dataset: GpDataset
    kernel: SquaredExponentialKernel
    lam: float | None
    chol_lower: np.ndarray | None
    solved_targets: np.ndarray | None

    @property
    def count(self) -> int:
        return self.dataset.count

    def mean(self, x: np.ndarray) -> float:
        return mean(self, x)

    def variance(self, x: np.ndarray) -> float:
        return variance(self, x)

    def mean_many(self, queries: np.ndarray) -> np.ndarray:
        """Posterior mean at each row of ``queries``; shape (n_queries,)."""
        if self.count == 0:
            q = np.atleast_2d(np.asarray(queries, dtype=float))
            return np.zeros(q.shape[0])
        k_cross = self.kernel.cross(self.dataset.points, queries)
        return k_cross @ self.solved_targets

    def variance_many(self, queries: np.ndarray) -> np.ndarray:
        """Posterior kernel diagonal at each row of ``queries``."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        prior = np.full(q.shape[0], self.kernel.signal_variance)
        if self.count == 0:
            return prior
        k_cross = self.kernel.cross(self.dataset.points, q)
        half = linalg.solve_triangular(self.chol_lower, k_cross.T, lower=True)
        var = prior - (half**2).sum(axis=0)
        bad = var < -1e-10
        if np.any(bad):
            raise NumericalError(
                f"posterior variance fell below -1e-10 (min {var.min():.3e})"
            )
        return np.maximum(var, 0.0)


def fit(
    points: Union[np.ndarray, Sequence[Sequence[float]]],
    targets: Union[np.ndarray, Sequence[float]],
    kernel: SquaredExponentialKernel,
) -> GpPosterior:
    """Fit the regularized posterior with lam = 1 + 2/N.

    An empty dataset yields the prior-only posterior.  The Gram matrix plus
    lam*I is factorized with a jitter escalation ladder; if every rung fails
    a :class:`NumericalError` is raised.
    """
    dataset = GpDataset(np.asarray(points, dtype=float), np.asarray(targets, dtype=float))
    n = dataset.count
    if n == 0:
        return GpPosterior(dataset, kernel, None, None, None)
    lam = 1.0 + 2.0 / n
    gram = kernel.gram(dataset.points)
    last_err: Exception | None = None
    for jitter in _JITTER_LADDER:
        try:
            lower = linalg.cholesky(
                gram + (lam + jitter) * np.eye(n), lower=True, check_finite=False
            )
        except linalg.LinAlgError as err:  # pragma: no cover - lam >= 1 in practice
            last_err = err
            continue
        solved = linalg.cho_solve((lower, True), dataset.targets, check_finite=False)
        return GpPosterior(dataset, kernel, lam, lower, solved)
    raise NumericalError(
        f"Cholesky factorization failed after jitter escalation: {last_err}"
    )  # pragma: no cover


def _check_query(gp: GpPosterior, x: np.ndarray) -> np.ndarray:
    q = np.asarray(x, dtype=float).ravel()
    if gp.count and q.shape[0] != gp.dataset.dim:
        raise ValueError(
            f"query has dim {q.shape[0]} but dataset has dim {gp.dataset.dim}"
        )
    return q


def mean(gp: GpPosterior, x: np.ndarray) -> float:
    """Posterior mean mu(x) from the cached factorization."""
    q = _check_query(gp, x)
    if gp.count == 0:
        return 0.0
    return float(gp.mean_many(q[None, :])[0])


def variance(gp: GpPosterior, x: np.ndarray) -> float:
    """Posterior kernel diagonal sigma(x) = k_N(x, x), in [0, k(x, x)]."""
    q = _check_query(gp, x)
    return float(gp.variance_many(q[None, :])[0])


def log_det_regularized_gram(gp: GpPosterior) -> float:
    """ln det(K + lam*I) from the Cholesky diagonal (0 for an empty dataset)."""
    if gp.count == 0:
        return 0.0
    return float(2.0 * np.log(np.diag(gp.chol_lower)).sum())


def confidence_multiplier(gp: GpPosterior, params: ConfidenceParams) -> float:
    """B + R * sqrt(2 * ln(sqrt(det(K + lam*I)) / delta)).

    The log-determinant comes from the cached factorization.  An empty
    dataset uses det = 1, so the prior multiplier is B + R*sqrt(2*ln(1/delta)).
    """
    log_arg = 0.5 * log_det_regularized_gram(gp) - math.log(params.conf_delta)
    if params.noise_scale == 0.0:
        return params.rkhs_bound
    if log_arg < 0.0:
        raise ValueError(
            "confidence multiplier undefined: sqrt(det(K + lam*I)) < delta"
        )
    return params.rkhs_bound + params.noise_scale * math.sqrt(2.0 * log_arg)


def upper_bound(gp: GpPosterior, params: ConfidenceParams, x: np.ndarray) -> float:
    """mu(x) + multiplier * spread(x), spread per ``params.sigma_mode``."""
    mult = confidence_multiplier(gp, params)
    var = variance(gp, x)
    spread = var if params.sigma_mode == "variance" else math.sqrt(var)
    return mean(gp, x) + mult * spread


def upper_bound_many(
    gp: GpPosterior, params: ConfidenceParams, queries: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`upper_bound` over rows of ``queries``."""
    mult = confidence_multiplier(gp, params)
    var = gp.variance_many(queries)
    spread = var if params.sigma_mode == "variance" else np.sqrt(var)
    return gp.mean_many(queries) + mult * spread


GP_SCHEMA_VERSION = 1


def posterior_to_dict(gp: GpPosterior) -> dict:
    """JSON-ready form: data and kernel parameters only, no factorization."""
    return {
        "schema_version": GP_SCHEMA_VERSION,
        "kind": "gp_posterior",
        "points": gp.dataset.points.tolist(),
        "targets": gp.dataset.targets.tolist(),
        "kernel": {
            "kind": "squared_exponential",
            "length_scale": gp.kernel.length_scale,
            "signal_variance": gp.kernel.signal_variance,
        },
        "lambda": gp.lam,
    }


def posterior_from_dict(payload: dict) -> GpPosterior:
    """Rebuild a posterior from its JSON form, recomputing the factorization."""
    if payload.get("kind") != "gp_posterior":
        raise ValueError(f"not a gp_posterior payload: kind={payload.get('kind')!r}")
    kspec = payload["kernel"]
    if kspec.get("kind") != "squared_exponential":
        raise ValueError(f"unsupported kernel kind: {kspec.get('kind')!r}")
    kernel = SquaredExponentialKernel(
        length_scale=float(kspec["length_scale"]),
        signal_variance=float(kspec["signal_variance"]),
    )
    points = np.asarray(payload["points"], dtype=float)
    targets = np.asarray(payload["targets"], dtype=float)
    if targets.size and points.ndim == 1:
        points = points.reshape(targets.size, -1)
    return fit(points, targets, kernel)


def save_posterior(gp: GpPosterior, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(posterior_to_dict(gp), indent=2, sort_keys=True))


def load_posterior(path: Union[str, Path]) -> GpPosterior:
    return posterior_from_dict(json.loads(Path(path).read_text()))
