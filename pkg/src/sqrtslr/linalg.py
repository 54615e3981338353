"""Dense square-root kernels: QR triangularization, block conditioning,
triangular solves, and the rank-1 Cholesky downdate used by the reference
baseline.

Covariances are always carried as triangular factors.  A lower factor L
represents the matrix L @ L.T and an upper factor U represents U.T @ U, so the
two orientations are adjoint views of the same PSD matrix.  All kernels are
generic over the floating dtype of their inputs; a call chain started in
float32 stays in float32 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class SingularMarginal(Exception):
    """A triangular solve hit a numerically zero diagonal entry."""


class DowndateFailure(Exception):
    """A Cholesky downdate hit the square root of a nonpositive pivot.

    Attributes ``index`` (pivot row inside the downdate), ``column`` (which
    downdate vector, set by the SLR layer), ``time_index`` and ``iteration``
    (set by the estimator layer) locate the failure.
    """

    def __init__(self, index: int):
        super().__init__(f"downdate pivot {index} is nonpositive")
        self.index = index
        self.column: int | None = None
        self.time_index: int | None = None
        self.iteration: int | None = None

    def __str__(self) -> str:
        where = f"pivot {self.index}"
        if self.column is not None:
            where += f", column {self.column}"
        if self.time_index is not None:
            where += f", time step {self.time_index}"
        if self.iteration is not None:
            where += f", iteration {self.iteration}"
        return f"Cholesky downdate failed ({where})"


@dataclass(frozen=True)
class TriangularFactor:
    """A triangular Cholesky-type factor of a PSD matrix.

    ``data`` is lower-triangular (representing data @ data.T) or
    upper-triangular (representing data.T @ data) depending on
    ``orientation``.  Upper factors may be rectangular-reduced (fewer rows
    than columns) when they come from a wide triangularization.
    """

    data: np.ndarray
    orientation: str

    def __post_init__(self):
        if self.orientation not in ("lower", "upper"):
            raise ValueError(f"bad orientation {self.orientation!r}")

    @classmethod
    def from_lower(cls, data) -> "TriangularFactor":
        return cls(np.tril(np.asarray(data)), "lower")

    @classmethod
    def from_upper(cls, data) -> "TriangularFactor":
        return cls(np.triu(np.asarray(data)), "upper")

    @property
    def dim(self) -> int:
        # dimension of the represented PSD matrix
        if self.orientation == "lower":
            return self.data.shape[0]
        return self.data.shape[1]

    @property
    def dtype(self):
        return self.data.dtype

    def to_lower(self) -> "TriangularFactor":
        if self.orientation == "lower":
            return self
        return TriangularFactor(self.data.T, "lower")

    def to_upper(self) -> "TriangularFactor":
        if self.orientation == "upper":
            return self
        return TriangularFactor(self.data.T, "upper")

    def full(self) -> np.ndarray:
        """The represented PSD matrix, densified."""
        l = self.to_lower().data
        return l @ l.T

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.data)


@dataclass(frozen=True)
class ConditioningResult:
    """Output of :func:`block_condition`: marginal factor P^{1/2}, gain
    Gamma, conditional factor Sigma^{1/2}, and the pre-solve gain
    Gamma_bar = Gamma @ P^{1/2}."""

    marginal_factor: TriangularFactor
    gain: np.ndarray
    conditional_factor: TriangularFactor
    raw_gain: np.ndarray


@dataclass
class OpCounts:
    """Mutable counters used to audit how many QRs / triangular solves the
    conditioning kernel performs."""

    qr: int = 0
    solve: int = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.qr, self.solve)

    def reset(self) -> None:
        self.qr = 0
        self.solve = 0


#: bumped by every triangularize / solve_right_triangular call
op_counts = OpCounts()
#: accumulated (measured, not asserted) work done inside block_condition
conditioning_counts = OpCounts()


def triangularize(m: np.ndarray) -> TriangularFactor:
    """Upper-triangular T with T.T @ T == m.T @ m, via the R factor of a QR
    decomposition.  The orthogonal factor is never formed.  Rows are
    sign-flipped so the diagonal is nonnegative."""
    m = np.atleast_2d(np.asarray(m))
    op_counts.qr += 1
    r = np.linalg.qr(m, mode="r")
    d = np.diagonal(r)
    signs = np.where(d < 0, -1, 1).astype(r.dtype)
    r = r * signs[:, None]
    return TriangularFactor(r, "upper")


def _check_diagonal(diag: np.ndarray, scale: float, dtype) -> None:
    tol = 16 * np.finfo(dtype).eps * scale
    small = np.abs(diag) <= tol
    if np.any(small):
        raise SingularMarginal(
            f"diagonal entry {int(np.argmax(small))} below tolerance {tol:g}"
        )


def solve_right_triangular(
    b: np.ndarray, factor: TriangularFactor, scale: float | None = None
) -> np.ndarray:
    """Solve X @ F = b for X, where F is the triangular matrix stored in
    ``factor`` (lower L or upper U as-is).  ``scale`` overrides the reference
    magnitude for the zero-diagonal check."""
    b = np.atleast_2d(np.asarray(b))
    t = factor.data
    if scale is None:
        scale = float(np.abs(t).max()) if t.size else 0.0
    _check_diagonal(np.diagonal(t), scale, t.dtype)
    op_counts.solve += 1
    lower = factor.orientation == "lower"
    # X F = b  <=>  F.T X.T = b.T
    x_t = scipy.linalg.solve_triangular(
        t, b.T, lower=lower, trans="T", check_finite=False
    )
    return x_t.T


def solve_left_triangular(factor: TriangularFactor, b: np.ndarray) -> np.ndarray:
    """Solve F @ X = b for X with F the stored triangular matrix."""
    b = np.asarray(b)
    t = factor.data
    scale = float(np.abs(t).max()) if t.size else 0.0
    _check_diagonal(np.diagonal(t), scale, t.dtype)
    op_counts.solve += 1
    lower = factor.orientation == "lower"
    return scipy.linalg.solve_triangular(t, b, lower=lower, check_finite=False)


def block_condition(
    prior_factor: TriangularFactor,
    mapping: np.ndarray,
    noise_factor: TriangularFactor,
) -> ConditioningResult:
    """Joint triangularization of the model u ~ N(u_bar, Pi),
    v | u ~ N(Psi u, Omega).

    Triangularizes the stacked pre-array

        [[Omega^{*/2},        0       ],
         [Pi^{*/2} Psi^T,  Pi^{*/2}  ]]

    and reads off the marginal factor P^{1/2} (P = Psi Pi Psi^T + Omega), the
    raw gain Gamma_bar, and the conditional factor Sigma^{1/2}
    (Sigma = Pi - Gamma P Gamma^T).  The gain Gamma = Pi Psi^T P^{-1} comes
    from exactly one right triangular solve against P^{1/2}.
    """
    psi = np.atleast_2d(np.asarray(mapping))
    pi_u = prior_factor.to_upper().data
    om_u = noise_factor.to_upper().data
    n = pi_u.shape[0]
    d = om_u.shape[0]
    dtype = np.result_type(pi_u, om_u, psi)
    pre = np.zeros((d + n, d + n), dtype=dtype)
    pre[:d, :d] = om_u
    pre[d:, :d] = pi_u @ psi.T
    pre[d:, d:] = pi_u
    scale = float(np.abs(pre).max())

    before = op_counts.snapshot()
    t = triangularize(pre).data
    p_lower = TriangularFactor(t[:d, :d].T, "lower")
    raw_gain = t[:d, d:].T
    sigma_lower = TriangularFactor(t[d:, d:].T, "lower")
    gain = solve_right_triangular(raw_gain, p_lower, scale=scale)
    after = op_counts.snapshot()
    conditioning_counts.qr += after[0] - before[0]
    conditioning_counts.solve += after[1] - before[1]

    return ConditioningResult(p_lower, gain, sigma_lower, raw_gain)


def rank_one_downdate(factor: TriangularFactor, v: np.ndarray) -> TriangularFactor:
    """Lower factor of L @ L.T - v @ v.T.

    Classical hypotenuse recursion; raises :class:`DowndateFailure` carrying
    the pivot index as soon as a pivot square goes nonpositive, which is the
    failure mode that makes downdating fragile in low precision.
    """
    l = factor.to_lower().data.copy()
    n = l.shape[0]
    x = np.array(v, dtype=l.dtype).reshape(n).copy()
    for k in range(n):
        dk = l[k, k]
        rsq = dk * dk - x[k] * x[k]
        if not rsq > 0 or dk == 0:
            raise DowndateFailure(k)
        r = np.sqrt(rsq)
        c = r / dk
        s = x[k] / dk
        l[k, k] = r
        if k + 1 < n:
            l[k + 1 :, k] = (l[k + 1 :, k] - s * x[k + 1 :]) / c
            x[k + 1 :] = c * x[k + 1 :] - s * l[k + 1 :, k]
    return TriangularFactor(l, "lower")
