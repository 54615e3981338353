"""Square-root Gaussian filtering and smoothing driven by SLR linearization.

Every predict and every update reduces to a single block conditioning step
(one QR decomposition plus one triangular solve); the backward smoothing
recursion and both residual-factor routes never subtract Gram matrices, so
the proposed pipeline is downdate-free end to end.  The reference baseline is
identical except that it builds residual factors via update/downdate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cubature import CubatureRule, TransformedNodes, check_assumption, transform
from .linalg import TriangularFactor, block_condition, triangularize
from .slr import NoiseModel, linearize


class DimensionMismatch(Exception):
    """Sequence lengths passed to the smoother do not conform."""


@dataclass(frozen=True)
class GaussianSqrt:
    """A Gaussian in square-root form: mean and lower covariance factor."""

    mean: np.ndarray
    cov_factor: TriangularFactor

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        return self.cov_factor.full()

    @classmethod
    def from_moments(cls, mean, cov) -> "GaussianSqrt":
        return cls(np.asarray(mean), TriangularFactor(np.linalg.cholesky(cov), "lower"))


@dataclass(frozen=True)
class BackwardKernel:
    """Parameters of x_m | x_{m+1}, y_{1:m}: mean = offset + gain @ x_{m+1},
    covariance given by cov_factor."""

    gain: np.ndarray
    offset: np.ndarray
    cov_factor: TriangularFactor


@dataclass(frozen=True)
class StateSpaceModel:
    transition_mean: Callable[[np.ndarray], np.ndarray]
    transition_noise: NoiseModel
    observation_mean: Callable[[np.ndarray], np.ndarray]
    observation_noise: NoiseModel
    state_dim: int
    obs_dim: int


@dataclass(frozen=True)
class FilterResult:
    filtered: list[GaussianSqrt]  # length n+1, entry 0 is the initial state
    predicted: list[GaussianSqrt]  # length n
    kernels: list[BackwardKernel]  # length n


def _require_rule(rule: CubatureRule) -> None:
    chk = check_assumption(rule)
    if not chk.passed:
        raise ValueError(f"cubature rule violates the SLR assumption: {chk.reason}")


def _sigma_points(point: GaussianSqrt, rule: CubatureRule) -> TransformedNodes:
    return transform(rule, point.mean, point.cov_factor)


def predict(
    posterior: GaussianSqrt,
    model: StateSpaceModel,
    rule: CubatureRule,
    linearization_point: GaussianSqrt | None = None,
    route: str = "qr",
) -> tuple[GaussianSqrt, BackwardKernel]:
    """One-step prediction plus the backward kernel for later smoothing.

    SLR of the transition mean about ``linearization_point`` (default: the
    posterior itself) gives an affine map with residual factor; one block
    conditioning then yields the predicted factor, smoother gain, and
    backward covariance factor together.
    """
    _require_rule(rule)
    lin = linearization_point if linearization_point is not None else posterior
    approx = linearize(
        model.transition_mean,
        _sigma_points(lin, rule),
        lin.cov_factor,
        model.transition_noise,
        route,
    )
    cond = block_condition(posterior.cov_factor, approx.slope, approx.residual_factor)
    mean_pred = approx.slope @ posterior.mean + approx.offset
    predicted = GaussianSqrt(mean_pred, cond.marginal_factor)
    kernel = BackwardKernel(
        cond.gain, posterior.mean - cond.gain @ mean_pred, cond.conditional_factor
    )
    return predicted, kernel


def update(
    predicted: GaussianSqrt,
    observation: np.ndarray,
    model: StateSpaceModel,
    rule: CubatureRule,
    linearization_point: GaussianSqrt | None = None,
    route: str = "qr",
) -> tuple[GaussianSqrt, TriangularFactor]:
    """Measurement update; returns the filtered state and the innovation
    covariance factor."""
    _require_rule(rule)
    y = np.asarray(observation)
    lin = linearization_point if linearization_point is not None else predicted
    approx = linearize(
        model.observation_mean,
        _sigma_points(lin, rule),
        lin.cov_factor,
        model.observation_noise,
        route,
    )
    cond = block_condition(predicted.cov_factor, approx.slope, approx.residual_factor)
    innovation = y - approx.slope @ predicted.mean - approx.offset
    filtered = GaussianSqrt(
        predicted.mean + cond.gain @ innovation, cond.conditional_factor
    )
    return filtered, cond.marginal_factor


def _annotate(err: Exception, time_index: int, iteration: int | None) -> None:
    if getattr(err, "time_index", None) is None:
        try:
            err.time_index = time_index
            err.iteration = iteration
        except AttributeError:
            pass


def filter_pass(
    init: GaussianSqrt,
    observations: Sequence[np.ndarray],
    model: StateSpaceModel,
    rule: CubatureRule,
    linearization_trajectory: Sequence[GaussianSqrt] | None = None,
    route: str = "qr",
    _iteration: int | None = None,
) -> FilterResult:
    """Forward pass: alternate predict/update over the observation sequence.

    When a linearization trajectory (length n+1, indexed by time) is given,
    the prediction into time m linearizes about entry m-1 and the update at
    time m about entry m; this is the inner sweep of the iterated smoother.
    """
    n = len(observations)
    if linearization_trajectory is not None and len(linearization_trajectory) != n + 1:
        raise DimensionMismatch(
            f"linearization trajectory has length {len(linearization_trajectory)}, "
            f"need {n + 1}"
        )
    filtered = [init]
    predicted: list[GaussianSqrt] = []
    kernels: list[BackwardKernel] = []
    for m in range(1, n + 1):
        lin_prev = lin_cur = None
        if linearization_trajectory is not None:
            lin_prev = linearization_trajectory[m - 1]
            lin_cur = linearization_trajectory[m]
        try:
            pred, kernel = predict(filtered[-1], model, rule, lin_prev, route)
            filt, _ = update(pred, observations[m - 1], model, rule, lin_cur, route)
        except Exception as err:
            _annotate(err, m, _iteration)
            raise
        predicted.append(pred)
        kernels.append(kernel)
        filtered.append(filt)
    return FilterResult(filtered, predicted, kernels)


def smooth_pass(
    filtered: Sequence[GaussianSqrt], kernels: Sequence[BackwardKernel]
) -> list[GaussianSqrt]:
    """Backward sweep through the stored kernels.

    The smoothed covariance Sigma_b + Gamma Sigma_{m+1} Gamma^T is formed by
    stacking the backward factor on top of (Gamma L_{m+1})^T and
    triangularizing: a pure update, no subtraction.
    """
    if len(kernels) != len(filtered) - 1:
        raise DimensionMismatch(
            f"{len(kernels)} kernels for {len(filtered)} filtered marginals"
        )
    smoothed = [filtered[-1]]
    for m in range(len(kernels) - 1, -1, -1):
        k = kernels[m]
        nxt = smoothed[0]
        mean = k.offset + k.gain @ nxt.mean
        pre = np.vstack(
            [k.cov_factor.to_upper().data, nxt.cov_factor.to_lower().data.T @ k.gain.T]
        )
        smoothed.insert(0, GaussianSqrt(mean, triangularize(pre).to_lower()))
    return smoothed


def ipls(
    init: GaussianSqrt,
    observations: Sequence[np.ndarray],
    model: StateSpaceModel,
    rule: CubatureRule,
    iterations: int,
    route: str = "qr",
) -> list[GaussianSqrt]:
    """Iterated posterior-linearization smoother, fixed iteration count.

    Iteration 1 is a plain filter+smoother sweep; every later iteration
    relinearizes all SLRs about the previous iteration's smoothed marginals.
    No damping, no early exit.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    smoothed: list[GaussianSqrt] | None = None
    for it in range(1, iterations + 1):
        result = filter_pass(
            init, observations, model, rule, smoothed, route, _iteration=it
        )
        try:
            smoothed = smooth_pass(result.filtered, result.kernels)
        except Exception as err:
            _annotate(err, len(observations), it)
            raise
    return smoothed
