"""Statistical linear regression (SLR) of a conditional-mean function against
a Gaussian in square-root form.

The residual covariance factor is produced by either the downdate-free QR
route (stack the residual node images next to the noise factor and
triangularize) or the reference update/downdate route (update by the centered
images, then sequentially downdate by the columns of slope @ Pi^{1/2}).  The
two routes agree as covariances whenever the downdates survive rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cubature import AssumptionViolated, TransformedNodes
from .linalg import (
    DowndateFailure,
    TriangularFactor,
    rank_one_downdate,
    solve_right_triangular,
    triangularize,
)


class SingularPrior(Exception):
    """The prior covariance factor has a numerically zero diagonal."""


class NonFiniteImage(Exception):
    """The regressed function (or a noise factor) produced NaN/Inf at a node."""


@dataclass(frozen=True)
class NoiseModel:
    """Conditional noise covariance in factor form.

    ``factor_at`` maps a node vector u to a lower factor of Omega(u); for
    ``kind == "constant"`` it ignores u.  ``root_rows_at``, when set, returns
    a (possibly rectangular) matrix S(u) with S.T @ S = Omega(u); stacking
    those rows is Gram-equivalent to stacking the triangular factor but lets
    the caller skip one triangularization per node.
    """

    kind: str
    factor_at: Callable[[np.ndarray], TriangularFactor]
    root_rows_at: Callable[[np.ndarray], np.ndarray] | None = None
    root_rows_batch: Callable[[np.ndarray], np.ndarray] | None = None


def constant_noise(factor: TriangularFactor) -> NoiseModel:
    factor = factor.to_lower()
    return NoiseModel("constant", lambda u: factor)


def state_dependent_noise(
    factor_at: Callable[[np.ndarray], TriangularFactor],
    root_rows_at: Callable[[np.ndarray], np.ndarray] | None = None,
    root_rows_batch: Callable[[np.ndarray], np.ndarray] | None = None,
) -> NoiseModel:
    return NoiseModel("state_dependent", factor_at, root_rows_at, root_rows_batch)


@dataclass(frozen=True)
class AffineApprox:
    """SLR output: v | u ≈ N(slope @ u + offset, residual)."""

    slope: np.ndarray
    offset: np.ndarray
    mean: np.ndarray
    residual_factor: TriangularFactor
    centered_images: np.ndarray
    residual_nodes: np.ndarray


def slr_moments(
    nodes: TransformedNodes,
    fn: Callable[[np.ndarray], np.ndarray],
    prior_factor: TriangularFactor,
):
    """First-stage SLR quantities (a_bar, slope, offset, dA, E).

    slope solves slope @ Pi = dA W dU^T through two right triangular solves
    against Pi^{1/2} and Pi^{*/2}; the dense inverse of Pi is never formed.
    E = dA - slope @ dU collects the residual node images.
    """
    l = prior_factor.to_lower()
    diag = np.abs(l.diagonal())
    scale = float(np.abs(l.data).max()) if l.data.size else 0.0
    if l.data.size == 0 or np.any(diag <= 16 * np.finfo(l.dtype).eps * scale):
        raise SingularPrior("prior factor has a numerically zero diagonal")

    u = nodes.nodes
    images = np.column_stack([np.asarray(fn(u[:, i])) for i in range(u.shape[1])])
    images = images.astype(np.result_type(u.dtype, images.dtype), copy=False)
    if not np.isfinite(images).all():
        raise NonFiniteImage("function image is not finite at some node")

    w = nodes.weights
    du = nodes.centered
    a_bar = images @ w
    d_images = images - a_bar[:, None]
    cross = (d_images * w) @ du.T  # dA W dU^T = slope @ Pi
    # slope (L L^T) = cross:  g = cross (L^T)^{-1}, slope = g L^{-1}
    g = solve_right_triangular(cross, l.to_upper())
    slope = solve_right_triangular(g, l)
    offset = a_bar - slope @ nodes.mean
    resid = d_images - slope @ du
    return a_bar, slope, offset, d_images, resid


def _noise_rows(noise: NoiseModel, nodes: TransformedNodes) -> list[np.ndarray]:
    """Rows whose Gram matrix is the effective noise covariance: the constant
    Omega^{*/2}, or the sqrt(w_i)-scaled per-node factors when Omega depends
    on the state."""
    if noise.kind == "constant":
        return [noise.factor_at(nodes.mean).to_upper().data]
    u = nodes.nodes
    if noise.root_rows_batch is not None:
        blocks = np.asarray(noise.root_rows_batch(u))  # (p, rows, dim)
        if not np.isfinite(blocks).all():
            raise NonFiniteImage("noise factor is not finite at some node")
        scaled = blocks * nodes.weight_sqrt[:, None, None]
        return [scaled.reshape(-1, blocks.shape[2])]
    rows = []
    for i in range(u.shape[1]):
        if noise.root_rows_at is not None:
            f = np.asarray(noise.root_rows_at(u[:, i]))
        else:
            f = noise.factor_at(u[:, i]).to_upper().data
        if not np.isfinite(f).all():
            raise NonFiniteImage(f"noise factor is not finite at node {i}")
        rows.append(nodes.weight_sqrt[i] * f)
    return rows


def residual_factor_qr(
    resid: np.ndarray,
    weight_sqrt: np.ndarray,
    noise: NoiseModel,
    nodes: TransformedNodes,
) -> TriangularFactor:
    """Downdate-free residual factor: triangularize the stack of the noise
    rows and (E W^{1/2})^T, realizing Omega_bar = Omega_eff + E W E^T as a
    pure update."""
    pre = np.vstack(_noise_rows(noise, nodes) + [(resid * weight_sqrt).T])
    return triangularize(pre).to_lower()


def residual_factor_downdate(
    d_images: np.ndarray,
    slope: np.ndarray,
    prior_factor: TriangularFactor,
    weight_sqrt: np.ndarray,
    noise: NoiseModel,
    nodes: TransformedNodes,
) -> TriangularFactor:
    """Reference route: update by dA W^{1/2}, then sequentially downdate by
    the columns of slope @ Pi^{1/2} (left to right).

    Raises :class:`DowndateFailure` annotated with the failing column when
    rounding makes a downdate pivot nonpositive.
    """
    pre = np.vstack(_noise_rows(noise, nodes) + [(d_images * weight_sqrt).T])
    factor = triangularize(pre).to_lower()
    v = slope @ prior_factor.to_lower().data
    for j in range(v.shape[1]):
        try:
            factor = rank_one_downdate(factor, v[:, j])
        except DowndateFailure as err:
            err.column = j
            raise
    return factor


def linearize(
    fn: Callable[[np.ndarray], np.ndarray],
    nodes: TransformedNodes,
    prior_factor: TriangularFactor,
    noise: NoiseModel,
    route: str = "qr",
) -> AffineApprox:
    """Full SLR of fn about the Gaussian behind ``nodes``; ``route`` selects
    the residual factorization ("qr" or "downdate")."""
    a_bar, slope, offset, d_images, resid = slr_moments(nodes, fn, prior_factor)
    if route == "qr":
        factor = residual_factor_qr(resid, nodes.weight_sqrt, noise, nodes)
    elif route == "downdate":
        factor = residual_factor_downdate(
            d_images, slope, prior_factor, nodes.weight_sqrt, noise, nodes
        )
    else:
        raise ValueError(f"unknown route {route!r}")
    return AffineApprox(slope, offset, a_bar, factor, d_images, resid)
