"""Product Gaussian correlation functions and their unit-cube integrals.

The correlation model is the product form

    R(x, x') = prod_l theta_l ** (4 (x_l - x'_l)^2)
             = exp( - sum_l rate_l (x_l - x'_l)^2 ),   rate_l = -4 log theta_l,

with per-dimension parameters ``theta_l`` in (0, 1).  Besides covariance
assembly, this module provides the closed-form integrals that make the
integrated design criteria cheap to evaluate:

* :func:`g_exp_integral` -- the 1-D integral of a product of two Gaussian
  bumps over [0, 1], reduced to normal CDFs.
* :func:`lambda_matrix` -- the matrix of unit-cube integrals of the
  covariance-vector outer product, assembled from ``g_exp_integral`` terms
  for single- and bi-fidelity models.

Quadrature counterparts are included for validation and as a fallback for
kernel families without closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr
from scipy.stats import qmc

from .errors import UnsupportedKernelError

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .gpmodel import Hyperparams

__all__ = [
    "LengthscaleParams",
    "KernelFamily",
    "KernelSpec",
    "corr_gaussian",
    "corr_matrix",
    "g_exp_integral",
    "lambda_matrix",
    "lambda_matrix_quadrature",
    "unit_cube_nodes",
]

_SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class LengthscaleParams:
    """Per-dimension correlation parameters ``theta_l`` in (0, 1).

    The equivalent positive rates ``theta_tilde_l = -4 log theta_l`` are
    exposed as :attr:`theta_tilde`; both views refer to the same kernel.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if theta.ndim != 1 or theta.size == 0:
            raise ValueError("theta must be a non-empty 1-D array")
        if np.any(theta <= 0.0) or np.any(theta >= 1.0):
            raise ValueError(f"every theta_l must lie strictly in (0, 1), got {theta}")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_rates(cls, theta_tilde: Sequence[float]) -> "LengthscaleParams":
        rates = np.atleast_1d(np.asarray(theta_tilde, dtype=float))
        if np.any(rates <= 0.0):
            raise ValueError("every rate must be positive")
        return cls(theta=np.exp(-rates / 4.0))

    @property
    def theta_tilde(self) -> np.ndarray:
        return -4.0 * np.log(self.theta)

    @property
    def p(self) -> int:
        return self.theta.size


class KernelFamily(Enum):
    GaussianProduct = "gaussian_product"


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its lengthscales and process variance."""

    lengthscales: LengthscaleParams
    variance: float
    family: KernelFamily = KernelFamily.GaussianProduct

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")


def _as_points(x, p: Optional[int] = None) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if p is not None and pts.shape[1] != p:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {p}")
    return pts


def corr_gaussian(x, x_prime, ls: LengthscaleParams) -> float:
    """Product Gaussian correlation between two points in [0,1]^p."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if a.shape != b.shape or a.size != ls.p:
        raise ValueError(
            f"dimension mismatch: x {a.shape}, x_prime {b.shape}, lengthscales p={ls.p}"
        )
    return float(np.exp(-np.dot(ls.theta_tilde, (a - b) ** 2)))


def _sq_dists_weighted(pa: np.ndarray, pb: np.ndarray, rates: np.ndarray) -> np.ndarray:
    # sum_l rate_l (a_il - b_jl)^2 as an (n_a, n_b) matrix
    diff = pa[:, None, :] - pb[None, :, :]
    return np.einsum("ijl,l->ij", diff * diff, rates)


def corr_matrix(points_a, points_b, spec: KernelSpec, nugget: float = 0.0) -> np.ndarray:
    """Covariance block ``variance * R(a_i, b_j)``; adds ``nugget`` on the
    diagonal when both point sets are identical."""
    if spec.family is not KernelFamily.GaussianProduct:
        raise UnsupportedKernelError(f"no correlation rule for family {spec.family}")
    if nugget < 0.0:
        raise ValueError("nugget must be nonnegative")
    pa = _as_points(points_a)
    pb = _as_points(points_b, p=pa.shape[1])
    if pa.shape[1] != spec.lengthscales.p:
        raise ValueError(
            f"points have dimension {pa.shape[1]}, kernel expects {spec.lengthscales.p}"
        )
    k = spec.variance * np.exp(-_sq_dists_weighted(pa, pb, spec.lengthscales.theta_tilde))
    same = pa.shape == pb.shape and np.array_equal(pa, pb)
    if same and nugget > 0.0:
        k = k + nugget * np.eye(pa.shape[0])
    return k


def _phi_diff(u_lo: np.ndarray, u_hi: np.ndarray) -> np.ndarray:
    """Phi(u_hi) - Phi(u_lo), elementwise, stable in both tails."""
    u_lo = np.asarray(u_lo, dtype=float)
    u_hi = np.asarray(u_hi, dtype=float)
    # When both limits sit in the upper tail the complement form avoids
    # catastrophic cancellation; the lower tail is accurate directly.
    upper = u_lo > 0.0
    direct = ndtr(u_hi) - ndtr(u_lo)
    complement = ndtr(-u_lo) - ndtr(-u_hi)
    out = np.where(upper, complement, direct)
    # Deep-tail rescue: both survival values underflowed to zero.
    dead = upper & (out == 0.0) & (u_hi > u_lo)
    if np.any(dead):
        lo = np.asarray(log_ndtr(-u_lo), dtype=float)
        hi = np.asarray(log_ndtr(-u_hi), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            rescued = np.exp(lo) * -np.expm1(np.minimum(hi - lo, 0.0))
        out = np.where(dead, rescued, out)
    return out


def _g_exp_array(a, x, b, y) -> np.ndarray:
    """Vectorized closed form of the [0,1] Gaussian-product integral."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        # exponent collapses to -a b (x-y)^2 / (a+b), always <= 0
        expo = np.where(s > 0.0, -a * b * (x - y) ** 2 / np.where(s > 0.0, s, 1.0), 0.0)
        m = np.where(s > 0.0, (a * x + b * y) / np.where(s > 0.0, s, 1.0), 0.0)
        root = np.sqrt(2.0 * np.where(s > 0.0, s, 1.0))
        u_lo = -m * root
        u_hi = (1.0 - m) * root
        val = np.sqrt(np.pi / np.where(s > 0.0, s, 1.0)) * np.exp(expo) * _phi_diff(u_lo, u_hi)
    return np.where(s > 0.0, val, 1.0)


def _g_quadrature(a: float, x: float, b: float, y: float, nodes: int = 48) -> float:
    z, w = np.polynomial.legendre.leggauss(nodes)
    z = 0.5 * (z + 1.0)
    w = 0.5 * w
    return float(np.sum(w * np.exp(-a * (x - z) ** 2 - b * (y - z) ** 2)))


def g_exp_integral(a: float, x: float, b: float, y: float) -> float:
    """Integral of exp(-a (x-z)^2) exp(-b (y-z)^2) over z in [0, 1].

    Symmetric under swapping (a, x) <-> (b, y); equals 1 when a = b = 0.
    Evaluated via the normal-CDF closed form with tail-stable branches, and
    a Gauss-Legendre fallback if the closed form degenerates.
    """
    if a < 0.0 or b < 0.0:
        raise ValueError(f"rates must be nonnegative, got a={a}, b={b}")
    if a + b == 0.0:
        return 1.0
    val = float(_g_exp_array(a, x, b, y))
    if not np.isfinite(val) or val < 0.0:
        val = _g_quadrature(a, x, b, y)
    return val


def _bifidelity_params(params: "Hyperparams"):
    rates_f = params.theta.theta_tilde
    var_f = params.sigma2
    var_d = float(getattr(params, "sigma2_delta", 0.0) or 0.0)
    theta_d = getattr(params, "theta_delta", None)
    rates_d = theta_d.theta_tilde if (theta_d is not None and var_d > 0.0) else None
    return var_f, rates_f, var_d, rates_d


def _g_product(points: np.ndarray, rates_i: np.ndarray, rates_j: np.ndarray) -> np.ndarray:
    """prod_l G([rates_i_l, x_il], [rates_j_l, x_jl]) over all point pairs."""
    n, p = points.shape
    out = np.ones((n, n))
    for l in range(p):
        xi = points[:, l][:, None]
        xj = points[:, l][None, :]
        out *= _g_exp_array(rates_i[l], xi, rates_j[l], xj)
    return out


def lambda_matrix(points, model_params: "Hyperparams", fidelity_flags=None) -> np.ndarray:
    """Unit-cube integral of the covariance-vector outer product.

    Entry (i, j) equals ``int gamma_i(x) gamma_j(x) dx`` over [0,1]^p, where
    ``gamma_i(x)`` is the covariance of data row i with the latent mean at x.
    Rows flagged physical carry the discrepancy kernel in addition to the
    main kernel; the process variances multiply each closed-form term so the
    identity holds exactly.

    Parameters
    ----------
    points : array (n, p)
        Design points, in data-layout order (computer block first).
    model_params : Hyperparams
        Kernel variances and lengthscale rates.
    fidelity_flags : bool array (n,), optional
        True where the row is a physical observation.  Omitted (or all-False
        discrepancy variance) means single-fidelity: only the main kernel.
    """
    pts = _as_points(points)
    n, p = pts.shape
    var_f, rates_f, var_d, rates_d = _bifidelity_params(model_params)
    if rates_f.size != p:
        raise ValueError(f"points have dimension {p}, kernel expects {rates_f.size}")

    lam = var_f * var_f * _g_product(pts, rates_f, rates_f)
    if rates_d is not None:
        if fidelity_flags is None:
            raise ValueError("fidelity_flags required when a discrepancy kernel is present")
        mask = np.asarray(fidelity_flags, dtype=bool)
        if mask.shape != (n,):
            raise ValueError(f"fidelity_flags must have shape ({n},)")
        if mask.any():
            ind = mask.astype(float)
            g_df = _g_product(pts, rates_d, rates_f)  # delta kernel on row i
            g_dd = _g_product(pts, rates_d, rates_d)
            lam = (
                lam
                + var_f * var_d * (ind[:, None] * g_df + ind[None, :] * g_df.T)
                + var_d * var_d * np.outer(ind, ind) * g_dd
            )
    return 0.5 * (lam + lam.T)


def lambda_border(points, x_new, model_params: "Hyperparams", fidelity_flags=None,
                  flag_new: bool = True) -> tuple[np.ndarray, float]:
    """Border row and corner of :func:`lambda_matrix` for one appended point.

    Returns ``(row, corner)`` with ``row[i] = int gamma_i gamma_new dx`` and
    ``corner = int gamma_new^2 dx``; together with the cached n-by-n block
    this completes the (n+1)-point matrix without recomputing it.
    """
    pts = _as_points(points)
    xn = np.atleast_1d(np.asarray(x_new, dtype=float))
    n, p = pts.shape
    var_f, rates_f, var_d, rates_d = _bifidelity_params(model_params)

    def g_prod(ra, xa, rb, xb):
        # xa: (m, p) columns against the scalar point xb: (p,)
        out = np.ones(xa.shape[0])
        for l in range(p):
            out = out * _g_exp_array(ra[l], xa[:, l], rb[l], np.full(xa.shape[0], xb[l]))
        return out

    row = var_f * var_f * g_prod(rates_f, pts, rates_f, xn)
    corner = var_f * var_f * float(g_prod(rates_f, xn[None, :], rates_f, xn)[0])
    if rates_d is not None:
        mask = (
            np.asarray(fidelity_flags, dtype=bool)
            if fidelity_flags is not None
            else np.zeros(n, dtype=bool)
        )
        fn = 1.0 if flag_new else 0.0
        row = (
            row
            + fn * var_f * var_d * g_prod(rates_f, pts, rates_d, xn)
            + mask * var_f * var_d * g_prod(rates_d, pts, rates_f, xn)
            + fn * mask * var_d * var_d * g_prod(rates_d, pts, rates_d, xn)
        )
        if flag_new:
            gfd = float(g_prod(rates_f, xn[None, :], rates_d, xn)[0])
            gdd = float(g_prod(rates_d, xn[None, :], rates_d, xn)[0])
            corner += 2.0 * var_f * var_d * gfd + var_d * var_d * gdd
    return row, corner


def unit_cube_nodes(p: int, nodes_per_axis: int = 64, qmc_points: int = 2**14,
                    seed: int = 0):
    """Integration nodes and weights on [0,1]^p.

    Tensor Gauss-Legendre for p <= 3, scrambled Sobol equal weights beyond.
    """
    if p <= 3:
        z, w = np.polynomial.legendre.leggauss(nodes_per_axis)
        z = 0.5 * (z + 1.0)
        w = 0.5 * w
        pts = np.stack([g.ravel() for g in np.meshgrid(*([z] * p), indexing="ij")], axis=1)
        wts = np.prod(
            np.stack([g.ravel() for g in np.meshgrid(*([w] * p), indexing="ij")], axis=1),
            axis=1,
        )
        return pts, wts
    sob = qmc.Sobol(d=p, scramble=True, seed=seed)
    pts = sob.random_base2(int(np.ceil(np.log2(qmc_points))))
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


def gamma_vector(points, x, model_params: "Hyperparams", fidelity_flags=None) -> np.ndarray:
    """Covariance of each data row with the latent mean at x (vectorized in x).

    Returns an (n, m) array for m evaluation points.
    """
    pts = _as_points(points)
    xs = _as_points(x, p=pts.shape[1])
    var_f, rates_f, var_d, rates_d = _bifidelity_params(model_params)
    diff = pts[:, None, :] - xs[None, :, :]
    g = var_f * np.exp(-np.einsum("ijl,l->ij", diff * diff, rates_f))
    if rates_d is not None and fidelity_flags is not None:
        mask = np.asarray(fidelity_flags, dtype=bool)
        if mask.any():
            gd = var_d * np.exp(-np.einsum("ijl,l->ij", diff * diff, rates_d))
            g = g + mask[:, None] * gd
    return g


def lambda_matrix_quadrature(points, model_params: "Hyperparams", fidelity_flags=None,
                             nodes_per_axis: int = 64, seed: int = 0) -> np.ndarray:
    """Quadrature evaluation of :func:`lambda_matrix`; validation oracle and
    fallback for kernel families without closed-form integrals."""
    pts = _as_points(points)
    nodes, wts = unit_cube_nodes(pts.shape[1], nodes_per_axis=nodes_per_axis, seed=seed)
    g = gamma_vector(pts, nodes, model_params, fidelity_flags)
    return (g * wts) @ g.T
