"""Standard-Gaussian cubature rules and their transformation to arbitrary
Gaussians given in square-root form.

Rules are built in float64; :func:`transform` casts nodes and weights to the
dtype of the covariance factor, so a float32 call chain sees float32 sigma
points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import TriangularFactor

#: refuse tensor rules bigger than this many nodes
MAX_NODES = 200_000


class RuleTooLarge(Exception):
    """A tensor-product rule would exceed the node cap."""


class AssumptionViolated(Exception):
    """The cubature rule has a negative weight, so W^{1/2} is undefined."""


@dataclass(frozen=True)
class CubatureRule:
    """Weights w (p,) and standard-normal nodes Z (n, p)."""

    weights: np.ndarray
    nodes: np.ndarray
    degree2_exact: bool
    all_weights_positive: bool

    @property
    def dim(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[1]


@dataclass(frozen=True)
class AssumptionCheck:
    passed: bool
    reason: str | None = None


@dataclass(frozen=True)
class TransformedNodes:
    """A rule moved to N(mean, Pi): centered columns dU_i = Pi^{1/2} z_i,
    nodes U_i = mean + dU_i, and the diagonal of W^{1/2} as a vector."""

    centered: np.ndarray
    nodes: np.ndarray
    weight_sqrt: np.ndarray
    weights: np.ndarray
    mean: np.ndarray


def spherical_radial(n: int) -> CubatureRule:
    """The 2n-node spherical-radial rule: nodes ±sqrt(n) e_i, weights 1/(2n).

    Node order is +sqrt(n) e_1 .. e_n followed by the negatives.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    eye = np.eye(n)
    nodes = np.sqrt(float(n)) * np.hstack([eye, -eye])
    weights = np.full(2 * n, 1.0 / (2 * n))
    return CubatureRule(weights, nodes, True, True)


def gauss_hermite(n: int, order: int, max_nodes: int = MAX_NODES) -> CubatureRule:
    """Tensor product of 1-D probabilists' Gauss-Hermite rules, order nodes
    per axis, exact to polynomial degree 2*order - 1 along each axis."""
    if n < 1 or order < 1:
        raise ValueError("dimension and order must be >= 1")
    p = order**n
    if p > max_nodes:
        raise RuleTooLarge(f"{order}^{n} = {p} nodes exceeds cap {max_nodes}")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    combos = list(itertools.product(range(order), repeat=n))
    nodes = np.array([[x[i] for i in combo] for combo in combos]).reshape(p, n).T
    weights = np.array([np.prod([w[i] for i in combo]) for combo in combos])
    return CubatureRule(weights, nodes, True, bool(weights.min() > 0))


def unscented(n: int, kappa: float) -> CubatureRule:
    """The 2n+1-point unscented rule with spread parameter kappa.

    Center weight kappa/(n+kappa) may be nonpositive; the rule is still
    degree-2 exact but then fails the positivity clause downstream.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    c = n + kappa
    if c <= 0:
        raise ValueError("n + kappa must be positive")
    eye = np.eye(n)
    nodes = np.hstack([np.zeros((n, 1)), np.sqrt(c) * eye, -np.sqrt(c) * eye])
    weights = np.concatenate([[kappa / c], np.full(2 * n, 1.0 / (2 * c))])
    return CubatureRule(weights, nodes, True, bool(weights.min() > 0))


def check_assumption(rule: CubatureRule) -> AssumptionCheck:
    """Numerically verify degree-2 exactness and weight positivity."""
    w = rule.weights
    z = rule.nodes
    if w.min() <= 0:
        return AssumptionCheck(False, f"nonpositive weight {w.min():g}")
    eps = np.finfo(w.dtype).eps
    scale = max(1.0, float(np.abs(z).max()) ** 2)
    tol = 64 * eps * scale * max(1, rule.n_nodes)
    if abs(w.sum() - 1.0) > tol:
        return AssumptionCheck(False, f"weights sum to {w.sum():.17g}, not 1")
    mean = z @ w
    if np.abs(mean).max() > tol:
        return AssumptionCheck(False, "mean moment is not 0 (degree-1 exactness fails)")
    cov = (z * w) @ z.T
    if np.abs(cov - np.eye(rule.dim)).max() > tol:
        return AssumptionCheck(
            False, "covariance moment is not identity (degree-2 exactness fails)"
        )
    return AssumptionCheck(True)


def transform(
    rule: CubatureRule, mean: np.ndarray, factor: TriangularFactor
) -> TransformedNodes:
    """Sigma points for N(mean, Pi) given Pi^{1/2}: dU = Pi^{1/2} Z,
    U = mean + dU."""
    if rule.weights.min() < 0:
        raise AssumptionViolated(
            f"negative weight {rule.weights.min():g}: W^(1/2) undefined"
        )
    dtype = factor.dtype
    l = factor.to_lower().data
    mean = np.asarray(mean, dtype=dtype).reshape(l.shape[0])
    z = rule.nodes.astype(dtype, copy=False)
    w = rule.weights.astype(dtype, copy=False)
    centered = l @ z
    nodes = mean[:, None] + centered
    return TransformedNodes(centered, nodes, np.sqrt(w), w, mean)
