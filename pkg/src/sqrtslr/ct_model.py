"""Coordinated-turn tracking model with conditionally-linear discretization.

State x = (p1, p2, v1, v2, omega): planar position, velocity, turn rate.
Holding omega fixed over a sampling interval makes the dynamics linear, with
transition matrix exp(A(omega) dt) available in closed form (rotation of the
velocity, integrated rotation feeding the position).  The process-noise
Gramian Q(omega, dt) is never densified: its Cholesky factor comes from
stacking scaled Gauss-Legendre evaluations of exp(A s) B and triangularizing.
Measurements are range and bearing from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import GaussianSqrt, StateSpaceModel
from .linalg import TriangularFactor, triangularize
from .slr import constant_noise, state_dependent_noise

#: Gauss-Legendre nodes for the noise Gramian; the integrand mixes low-order
#: polynomials with sin/cos(omega s), so 20 nodes are far beyond sufficient
#: for |omega| dt of order one.
QUAD_ORDER = 20


class OriginSingularity(Exception):
    """Bearing is undefined: the position is (numerically) at the origin."""


@dataclass(frozen=True)
class CtParams:
    """Continuous-time coordinated-turn parameters and initial distribution.

    ``cov0_diag`` is by default read literally as the diagonal of the initial
    covariance; pass ``sigma0_as_stddev=True`` to the model builder to read
    the entries as standard deviations instead.
    """

    dt: float = 1.0
    sigma_x: float = 0.03
    sigma_y: float = 0.03
    sigma_omega: float = 0.013
    sigma_r: float = 10.0
    sigma_theta: float = 0.0031
    mean0: tuple = (1000.0, 1000.0, 300.0, 0.0, -0.0523)
    cov0_diag: tuple = (10.0, 10.0, 3.162, 3.162, 0.316)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("sigma_x", "sigma_y", "sigma_omega", "sigma_r", "sigma_theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _rotation_terms(omega, tau, dtype):
    """(a, b, c, s) with a = int cos(omega u) du, b = int sin(omega u) du over
    [0, tau], c = cos(omega tau), s = sin(omega tau).  1 - cos is evaluated
    as 2 sin^2(x/2) so small turn rates lose no precision."""
    dtype = np.dtype(dtype).type
    tau = np.asarray(tau, dtype=dtype)
    omega = dtype(omega)
    if omega == 0:
        one = np.ones_like(tau)
        zero = np.zeros_like(tau)
        return tau, zero, one, zero
    x = omega * tau
    c = np.cos(x)
    s = np.sin(x)
    a = s / omega
    b = 2 * np.sin(x / 2) ** 2 / omega
    return a, b, c, s


def transition_matrix(omega: float, dt: float, dtype=np.float64) -> np.ndarray:
    """exp(A(omega) dt): identity position block with integrated-rotation
    coupling to the velocity, rotation on the velocity, invariant turn rate."""
    a, b, c, s = _rotation_terms(omega, dt, dtype)
    phi = np.eye(5, dtype=dtype)
    phi[0, 2] = a
    phi[0, 3] = -b
    phi[1, 2] = b
    phi[1, 3] = a
    phi[2, 2] = c
    phi[2, 3] = -s
    phi[3, 2] = s
    phi[3, 3] = c
    return phi


_leggauss_cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss01(order: int, dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1], cached per dtype."""
    key = (order, np.dtype(dtype).name)
    if key not in _leggauss_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        _leggauss_cache[key] = (
            ((x + 1) / 2).astype(dtype),
            (w / 2).astype(dtype),
        )
    return _leggauss_cache[key]


def gramian_root_rows(
    omega: float, params: CtParams, dtype=np.float64, quad_order: int = QUAD_ORDER
) -> np.ndarray:
    """Rows G with G^T G = Q(omega, dt) = int_0^dt exp(A s) B B^T exp(A^T s) ds.

    Row triple i holds sqrt(w_i) * (exp(A (dt - s_i)) B)^T at the i-th
    Gauss-Legendre node; B carries (sigma_x, sigma_y) into the velocity and
    sigma_omega into the turn rate.  The dense Gramian is never formed.
    """
    dtype = np.dtype(dtype).type
    dt = dtype(params.dt)
    x01, w01 = _leggauss01(quad_order, dtype)
    tau = (1 - x01) * dt  # dt - s_i
    root_w = np.sqrt(w01 * dt)
    a, b, c, s = _rotation_terms(omega, tau, dtype)

    sx = dtype(params.sigma_x)
    sy = dtype(params.sigma_y)
    so = dtype(params.sigma_omega)
    pre = np.zeros((3 * quad_order, 5), dtype=dtype)
    pre[0::3, 0] = root_w * sx * a
    pre[0::3, 1] = root_w * sx * b
    pre[0::3, 2] = root_w * sx * c
    pre[0::3, 3] = root_w * sx * s
    pre[1::3, 0] = -root_w * sy * b
    pre[1::3, 1] = root_w * sy * a
    pre[1::3, 2] = -root_w * sy * s
    pre[1::3, 3] = root_w * sy * c
    pre[2::3, 4] = root_w * so
    return pre


def gramian_root_rows_batch(
    omegas: np.ndarray, params: CtParams, dtype=np.float64, quad_order: int = QUAD_ORDER
) -> np.ndarray:
    """:func:`gramian_root_rows` for a vector of turn rates at once; returns
    shape (len(omegas), 3 * quad_order, 5)."""
    dtype = np.dtype(dtype).type
    omegas = np.asarray(omegas, dtype=dtype).reshape(-1)
    dt = dtype(params.dt)
    x01, w01 = _leggauss01(quad_order, dtype)
    tau = (1 - x01) * dt
    root_w = np.sqrt(w01 * dt)

    safe = np.where(omegas == 0, dtype(1), omegas)
    x = omegas[:, None] * tau[None, :]
    c = np.cos(x)
    s = np.sin(x)
    zero = omegas[:, None] == 0
    a = np.where(zero, tau[None, :], s / safe[:, None])
    b = np.where(zero, dtype(0), 2 * np.sin(x / 2) ** 2 / safe[:, None])

    sx = dtype(params.sigma_x)
    sy = dtype(params.sigma_y)
    so = dtype(params.sigma_omega)
    pre = np.zeros((omegas.shape[0], 3 * quad_order, 5), dtype=dtype)
    pre[:, 0::3, 0] = root_w * sx * a
    pre[:, 0::3, 1] = root_w * sx * b
    pre[:, 0::3, 2] = root_w * sx * c
    pre[:, 0::3, 3] = root_w * sx * s
    pre[:, 1::3, 0] = -root_w * sy * b
    pre[:, 1::3, 1] = root_w * sy * a
    pre[:, 1::3, 2] = -root_w * sy * s
    pre[:, 1::3, 3] = root_w * sy * c
    pre[:, 2::3, 4] = root_w * so
    return pre


def ct_discretize(
    omega: float, params: CtParams, dtype=np.float64, quad_order: int = QUAD_ORDER
) -> tuple[np.ndarray, TriangularFactor]:
    """Transition matrix and lower Cholesky factor of the process-noise
    Gramian for one sampling interval, via :func:`gramian_root_rows`."""
    rows = gramian_root_rows(omega, params, dtype, quad_order)
    return transition_matrix(omega, params.dt, dtype), triangularize(rows).to_lower()


def ct_transition_mean(x: np.ndarray, params: CtParams) -> np.ndarray:
    """exp(A(omega(x)) dt) @ x, nonlinear in x through the turn-rate entry."""
    x = np.asarray(x)
    return transition_matrix(float(x[4]), params.dt, x.dtype) @ x


def ct_observe(x: np.ndarray, origin_tol: float = 1e-9) -> np.ndarray:
    """Range and bearing of the position, bearing in (-pi, pi]."""
    x = np.asarray(x)
    r = np.hypot(x[0], x[1])
    if r < origin_tol:
        raise OriginSingularity(f"position norm {r:g} below {origin_tol:g}")
    return np.array([r, np.arctan2(x[1], x[0])], dtype=x.dtype)


def initial_state(
    params: CtParams, dtype=np.float64, sigma0_as_stddev: bool = False
) -> GaussianSqrt:
    diag = np.asarray(params.cov0_diag, dtype=dtype)
    factor = np.diag(diag if sigma0_as_stddev else np.sqrt(diag))
    return GaussianSqrt(
        np.asarray(params.mean0, dtype=dtype), TriangularFactor(factor, "lower")
    )


def coordinated_turn_model(
    params: CtParams, dtype=np.float64, quad_order: int = QUAD_ORDER
) -> StateSpaceModel:
    """State-space model for the filter: state-dependent process noise
    (Q depends on the node's turn rate), constant range/bearing noise."""

    def q_factor(u):
        return ct_discretize(float(u[4]), params, dtype, quad_order)[1]

    def q_root_rows(u):
        return gramian_root_rows(float(u[4]), params, dtype, quad_order)

    def q_root_rows_batch(nodes):
        return gramian_root_rows_batch(nodes[4, :], params, dtype, quad_order)

    r_factor = TriangularFactor(
        np.diag(np.array([params.sigma_r, params.sigma_theta], dtype=dtype)), "lower"
    )
    return StateSpaceModel(
        transition_mean=lambda x: ct_transition_mean(x, params),
        transition_noise=state_dependent_noise(q_factor, q_root_rows, q_root_rows_batch),
        observation_mean=ct_observe,
        observation_noise=constant_noise(r_factor),
        state_dim=5,
        obs_dim=2,
    )


def simulate_trajectory(
    params: CtParams,
    length: int,
    seed,
    sigma0_as_stddev: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Ground truth in float64: ``length`` states, the first drawn from the
    initial distribution, plus a noisy range/bearing observation of each.

    Deterministic given the seed (an int or a numpy SeedSequence).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    init = initial_state(params, np.float64, sigma0_as_stddev)
    states = np.empty((length, 5))
    observations = np.empty((length, 2))
    x = init.mean + init.cov_factor.data @ rng.standard_normal(5)

    def observe(xk):
        clean = ct_observe(xk)
        noise = rng.standard_normal(2) * np.array([params.sigma_r, params.sigma_theta])
        return clean + noise

    states[0] = x
    observations[0] = observe(x)
    for m in range(1, length):
        phi, q_factor = ct_discretize(float(x[4]), params)
        x = phi @ x + q_factor.data @ rng.standard_normal(5)
        states[m] = x
        observations[m] = observe(x)
    return states, observations
