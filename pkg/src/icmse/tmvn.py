"""Orthant probabilities and moments of truncated multivariate normals.

Dispatch by dimension:

* d = 1: closed forms with tail-stable branches (log-CDF Mills ratio above
  z = 8, asymptotic series above z = 100).
* d = 2: the orthant probability is evaluated exactly via the arcsin-form
  correlation integral (Gauss-Legendre after the ``t = sin u`` substitution),
  which reproduces ``1/4 + arcsin(r)/(2 pi)`` at zero bounds.
* d >= 3: sequentially-conditioned quasi-Monte Carlo (scrambled Sobol,
  2^13 points by default), deterministic for a given seed.

First and second moments under box truncation are computed by the exact
reduction to lower-dimensional non-centered box probabilities, so moment
accuracy is limited only by the accuracy of the nested probabilities (no
sampling noise).  All internals accept general boxes ``[lower, upper]``;
the public operations expose the lower-truncation case used by the
censored-data model.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri
from scipy.stats import qmc

from .errors import DegenerateTruncationError, NumericalError

__all__ = [
    "MvnSpec",
    "TruncatedMoments",
    "orthant_prob",
    "trunc_univariate",
    "trunc_moments",
    "mvn_box_prob",
    "trunc_moments_box",
]

_LOG_2PI = np.log(2.0 * np.pi)
_QMC_POINTS = 2**13
_PROB_FLOOR = 1e-300

# Gauss-Legendre rule reused by the bivariate orthant integral.
_GL96 = np.polynomial.legendre.leggauss(96)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / np.sqrt(2.0 * np.pi)


def _phi_diff(lo, hi):
    """Phi(hi) - Phi(lo), stable in both tails (scalar or array)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > 0.0
    direct = ndtr(hi) - ndtr(lo)
    complement = ndtr(-lo) - ndtr(-hi)
    out = np.where(upper, complement, direct)
    dead = upper & (out == 0.0) & (hi > lo)
    if np.any(dead):
        llo = np.asarray(log_ndtr(-lo), dtype=float)
        lhi = np.asarray(log_ndtr(-hi), dtype=float)
        rescued = np.exp(llo) * -np.expm1(np.minimum(lhi - llo, 0.0))
        out = np.where(dead, rescued, out)
    return out


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MvnSpec:
    """Mean vector and symmetric positive-definite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = mean.size
        if cov.shape != (d, d):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {d}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise ValueError("cov is not symmetric to 1e-12")
        if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) <= -1e-10 * scale:
            raise ValueError("cov has an eigenvalue below -1e-10 before jitter")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def d(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class TruncatedMoments:
    """Region probability plus first two moments of the truncated law."""

    prob: float
    mean: np.ndarray
    cov: np.ndarray


# ---------------------------------------------------------------------------
# Cholesky with jitter policy
# ---------------------------------------------------------------------------


def _chol_jitter(cov: np.ndarray) -> np.ndarray:
    """Cholesky factor, adding 1e-8 * mean(diag) at most twice on failure."""
    c = np.array(cov, dtype=float)
    jitter = 1e-8 * float(np.mean(np.diag(c))) if c.size else 0.0
    jitter = max(jitter, 1e-300)
    for attempt in range(3):
        try:
            return np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            if attempt == 2:
                break
            c = c + jitter * np.eye(c.shape[0])
    cond = float(np.linalg.cond(cov)) if cov.size else np.inf
    raise NumericalError(
        f"covariance not positive definite after jitter (condition number {cond:.3e})"
    )


# ---------------------------------------------------------------------------
# univariate truncation
# ---------------------------------------------------------------------------


def _mills_inverse(z: float) -> float:
    """phi(z) / (1 - Phi(z)) with tail-stable branches."""
    if z <= 8.0:
        sf = ndtr(-z)
        return float(_phi(z) / sf)
    if z <= 100.0:
        # log-CDF branch: exact up to exp/log rounding
        log_alpha = -0.5 * z * z - 0.5 * _LOG_2PI - log_ndtr(-z)
        return float(np.exp(log_alpha))
    zi = 1.0 / z
    return float(z + zi - 2.0 * zi**3 + 10.0 * zi**5)


def _lower_trunc_uni(mu: float, var: float, lower: float):
    """(prob, mean, var) of N(mu, var) conditioned on exceeding ``lower``."""
    sigma = np.sqrt(var)
    z = (lower - mu) / sigma
    if not np.isfinite(z):
        if z == -np.inf:
            return 1.0, mu, var
        raise DegenerateTruncationError(f"lower bound {lower} leaves no mass")
    prob = float(np.exp(log_ndtr(-z)))
    alpha = _mills_inverse(z)
    mean = mu + sigma * alpha
    if z > 100.0:
        zi = 1.0 / z
        ratio = zi * zi * (1.0 - 6.0 * zi * zi)
    else:
        ratio = 1.0 + z * alpha - alpha * alpha
    variance = var * max(ratio, 1e-300)
    return prob, float(mean), float(variance)


def _box_trunc_uni(mu: float, var: float, lower: float, upper: float):
    """(prob, mean, var) of N(mu, var) conditioned on [lower, upper]."""
    lo_inf = not np.isfinite(lower)
    hi_inf = not np.isfinite(upper)
    if lo_inf and hi_inf:
        return 1.0, mu, var
    if hi_inf:
        return _lower_trunc_uni(mu, var, lower)
    if lo_inf:
        p, m, v = _lower_trunc_uni(-mu, var, -upper)
        return p, -m, v
    sigma = np.sqrt(var)
    a = (lower - mu) / sigma
    b = (upper - mu) / sigma
    z = float(_phi_diff(a, b))
    if z < _PROB_FLOOR:
        raise DegenerateTruncationError("box truncation region has vanishing probability")
    pa, pb = _phi(a), _phi(b)
    mean = mu + sigma * (pa - pb) / z
    ratio = 1.0 + (a * pa - b * pb) / z - ((pa - pb) / z) ** 2
    return z, float(mean), float(var * max(ratio, 0.0))


def trunc_univariate(mu: float, var: float, lower: float) -> TruncatedMoments:
    """Moments of a normal truncated below at ``lower``.

    Mean is ``mu + sigma * phi(z) / (1 - Phi(z))`` with ``z`` the normalized
    bound; deep-tail inputs switch to log-CDF / Mills-ratio branches so the
    result stays finite even when the probability underflows.
    """
    if not var > 0.0:
        raise ValueError(f"var must be positive, got {var}")
    prob, mean, variance = _lower_trunc_uni(float(mu), float(var), float(lower))
    return TruncatedMoments(prob=prob, mean=np.array([mean]), cov=np.array([[variance]]))


# ---------------------------------------------------------------------------
# box probabilities
# ---------------------------------------------------------------------------


def _bvn_upper(h: float, k: float, r: float) -> float:
    """P(X >= h, Y >= k) for standard bivariate normal with correlation r.

    Uses the identity d P / d r = bivariate density, integrated in the
    arcsin-substituted variable so the integrand is analytic up to |r| = 1.
    """
    if h == np.inf or k == np.inf:
        return 0.0
    base = float(ndtr(-h) * ndtr(-k))
    if r == 0.0 or h == -np.inf or k == -np.inf:
        if h == -np.inf and k == -np.inf:
            return 1.0
        if h == -np.inf:
            return float(ndtr(-k))
        if k == -np.inf:
            return float(ndtr(-h))
        return base
    r = min(max(r, -1.0 + 1e-15), 1.0 - 1e-15)
    asr = np.arcsin(r)
    nodes, weights = _GL96
    u = 0.5 * asr * (nodes + 1.0)
    cos2 = np.cos(u) ** 2
    expo = -(h * h + k * k - 2.0 * h * k * np.sin(u)) / (2.0 * cos2)
    integral = 0.5 * asr * np.sum(weights * np.exp(expo))
    return float(min(max(base + integral / (2.0 * np.pi), 0.0), 1.0))


def _box_prob_2d(cov: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    s = np.sqrt(np.diag(cov))
    r = float(cov[0, 1] / (s[0] * s[1]))
    al, bl = a / s, b / s

    def upper(u0, u1):
        return _bvn_upper(u0, u1, r)

    return max(
        upper(al[0], al[1]) - upper(al[0], bl[1]) - upper(bl[0], al[1]) + upper(bl[0], bl[1]),
        0.0,
    )


@lru_cache(maxsize=128)
def _sobol_uniforms(d: int, log2n: int, seed: int) -> np.ndarray:
    """Scrambled Sobol point set, cached: the same (dims, count, seed) triple
    recurs for every candidate scored within one optimization step."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed & 0xFFFFFFFF)))
    pts = qmc.Sobol(d=d, scramble=True, seed=rng).random_base2(log2n)
    pts.flags.writeable = False
    return pts


def _genz_qmc_box(cov: np.ndarray, a: np.ndarray, b: np.ndarray, seed: int,
                  n_points: int = _QMC_POINTS) -> float:
    """Genz sequentially-conditioned QMC estimate of P(a <= Z <= b), Z ~ N(0, cov)."""
    d = cov.shape[0]
    # restrictive coordinates first: cheap static reordering
    width = _phi_diff(a / np.sqrt(np.diag(cov)), b / np.sqrt(np.diag(cov)))
    order = np.argsort(width)
    cov = cov[np.ix_(order, order)]
    a, b = a[order], b[order]
    L = _chol_jitter(cov)

    lo = float(ndtr(a[0] / L[0, 0]))
    hi = float(ndtr(b[0] / L[0, 0]))
    u = _sobol_uniforms(d - 1, int(np.log2(n_points)), int(seed))
    n = u.shape[0]
    f = np.full(n, hi - lo)
    d_prev = np.full(n, lo)
    e_prev = np.full(n, hi)
    y = np.empty((n, d - 1))
    eps = 1e-15
    one_m_eps = 1.0 - eps
    for i in range(1, d):
        quantile = d_prev + u[:, i - 1] * (e_prev - d_prev)
        np.maximum(quantile, eps, out=quantile)
        np.minimum(quantile, one_m_eps, out=quantile)
        y[:, i - 1] = ndtri(quantile)
        mu = y[:, :i] @ L[i, :i]
        d_prev = ndtr((a[i] - mu) / L[i, i])
        e_prev = ndtr((b[i] - mu) / L[i, i])
        f *= np.maximum(e_prev - d_prev, 0.0)
    return float(min(max(np.mean(f), 0.0), 1.0))


def _box_prob(cov: np.ndarray, a: np.ndarray, b: np.ndarray, seed: int,
              n_points: int = _QMC_POINTS) -> float:
    """P(a <= Z <= b) for Z ~ N(0, cov); exact for d <= 2, QMC beyond."""
    d = cov.shape[0]
    if d == 0:
        return 1.0
    finite = np.isfinite(a) | np.isfinite(b)
    if not np.any(finite):
        return 1.0
    if d == 1:
        return float(_phi_diff(a[0] / np.sqrt(cov[0, 0]), b[0] / np.sqrt(cov[0, 0])))
    if d == 2:
        return _box_prob_2d(cov, a, b)
    return _genz_qmc_box(cov, a, b, seed, n_points=n_points)


def mvn_box_prob(spec: MvnSpec, lower, upper, rng_seed: int = 0) -> float:
    """P(lower <= Z <= upper) for Z ~ spec, deterministic given ``rng_seed``."""
    a = np.broadcast_to(np.asarray(lower, dtype=float), (spec.d,)) - spec.mean
    b = np.broadcast_to(np.asarray(upper, dtype=float), (spec.d,)) - spec.mean
    if np.any(a > b):
        raise ValueError("lower bound exceeds upper bound")
    return _box_prob(spec.cov, np.asarray(a), np.asarray(b), rng_seed)


def orthant_prob(spec: MvnSpec, lower, rng_seed: int = 0) -> float:
    """P(Z >= lower componentwise) for Z ~ spec.

    Exact closed form for d = 1, analytic bivariate integral for d = 2,
    sequentially-conditioned QMC (scrambled Sobol, deterministic in
    ``rng_seed``) for d >= 3.
    """
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (spec.d,))
    upper = np.full(spec.d, np.inf)
    return _box_prob(spec.cov, lower - spec.mean, upper, rng_seed)


# ---------------------------------------------------------------------------
# moments under box truncation (exact reduction)
# ---------------------------------------------------------------------------


def _sub_seed(seed: int, *tags: int) -> int:
    # cheap deterministic mix; feeds only the Sobol scrambling seed
    h = int(seed) & 0xFFFFFFFF
    for t in tags:
        h = (h * 0x9E3779B1 + (int(t) & 0xFFFFFFFF) + 0x7F4A7C15) & 0xFFFFFFFF
    return h


def _cond_given_one(cov: np.ndarray, k: int, t: float):
    """Conditional mean shift and covariance of the other coordinates given X_k = t."""
    idx = np.arange(cov.shape[0]) != k
    c = cov[idx, k] / cov[k, k]
    mean = c * t
    sub = cov[np.ix_(idx, idx)] - np.outer(c, cov[k, idx])
    return idx, mean, sub


def _fk(cov, a, b, k, t, seed, tag, n_points=_QMC_POINTS):
    """Marginal density at X_k = t times the conditional box probability."""
    skk = cov[k, k]
    pdf = float(np.exp(-0.5 * t * t / skk) / np.sqrt(2.0 * np.pi * skk))
    if pdf == 0.0 or cov.shape[0] == 1:
        return pdf
    idx, m, sub = _cond_given_one(cov, k, t)
    p = _box_prob(sub, a[idx] - m, b[idx] - m, _sub_seed(seed, 11, k, tag),
                  n_points=n_points)
    return pdf * p


def _fkq(cov, a, b, k, q, s, t, seed, n_points=_QMC_POINTS):
    """Bivariate density at (X_k, X_q) = (s, t) times the conditional box probability."""
    pair = np.array([k, q])
    sub2 = cov[np.ix_(pair, pair)]
    det = sub2[0, 0] * sub2[1, 1] - sub2[0, 1] ** 2
    if det <= 0.0:
        return 0.0
    v = np.array([s, t])
    quad = v @ np.linalg.solve(sub2, v)
    pdf2 = float(np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det)))
    d = cov.shape[0]
    if pdf2 == 0.0 or d == 2:
        return pdf2
    rest = np.array([i for i in range(d) if i != k and i != q])
    c = np.linalg.solve(sub2, cov[np.ix_(pair, rest)]).T  # (d-2, 2)
    m = c @ v
    sub = cov[np.ix_(rest, rest)] - c @ cov[np.ix_(pair, rest)]
    p = _box_prob(sub, a[rest] - m, b[rest] - m, _sub_seed(seed, 13, k, q),
                  n_points=n_points)
    return pdf2 * p


def _mw_moments(mean: np.ndarray, cov: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                seed: int, n_points: int = _QMC_POINTS):
    """First two moments of N(mean, cov) restricted to the box [lower, upper].

    Exact reduction to nested box probabilities: first moments need the
    (d-1)-dimensional conditional probabilities at each finite face, second
    moments additionally the (d-2)-dimensional ones at each pair of faces.
    """
    d = mean.size
    a = lower - mean
    b = upper - mean
    p = _box_prob(cov, a, b, _sub_seed(seed, 7), n_points=n_points)
    if p < _PROB_FLOOR:
        raise DegenerateTruncationError("truncation region has vanishing probability")

    fa = np.zeros(d)
    fb = np.zeros(d)
    for k in range(d):
        if np.isfinite(a[k]):
            fa[k] = _fk(cov, a, b, k, a[k], seed, 0, n_points=n_points)
        if np.isfinite(b[k]):
            fb[k] = _fk(cov, a, b, k, b[k], seed, 1, n_points=n_points)
    q = fa - fb
    ex = cov @ q / p  # E[X] in the zero-mean frame

    # diagonal face terms a_k F_k(a_k) - b_k F_k(b_k); infinite faces vanish
    g = np.zeros(d)
    for k in range(d):
        if np.isfinite(a[k]):
            g[k] += a[k] * fa[k]
        if np.isfinite(b[k]):
            g[k] -= b[k] * fb[k]

    w = np.zeros((d, d))
    for k in range(d):
        for qi in range(k + 1, d):
            acc = 0.0
            for s_val, sgn_s in ((a[k], 1.0), (b[k], -1.0)):
                if not np.isfinite(s_val):
                    continue
                for t_val, sgn_t in ((a[qi], 1.0), (b[qi], -1.0)):
                    if not np.isfinite(t_val):
                        continue
                    acc += sgn_s * sgn_t * _fkq(cov, a, b, k, qi, s_val, t_val, seed,
                                                n_points=n_points)
            w[k, qi] = acc
            w[qi, k] = acc

    diag = np.diag(cov)
    r = np.einsum("kq,kq->k", w, cov)
    exx = cov + (cov * ((g - r) / diag)) @ cov / p + cov @ w @ cov / p
    cov_t = exx - np.outer(ex, ex)
    cov_t = 0.5 * (cov_t + cov_t.T)
    return p, mean + ex, cov_t


def _mw_mean(mean: np.ndarray, cov: np.ndarray, lower: np.ndarray, upper: np.ndarray,
             seed: int, n_points: int = _QMC_POINTS):
    """(prob, first moment) of the box-truncated normal; skips second moments."""
    d = mean.size
    if d == 1:
        p, m, _ = _box_trunc_uni(mean[0], cov[0, 0], lower[0], upper[0])
        return p, np.array([m])
    a = lower - mean
    b = upper - mean
    p = _box_prob(cov, a, b, _sub_seed(seed, 7), n_points=n_points)
    if p < _PROB_FLOOR:
        raise DegenerateTruncationError("truncation region has vanishing probability")
    fa = np.zeros(d)
    fb = np.zeros(d)
    for k in range(d):
        if np.isfinite(a[k]):
            fa[k] = _fk(cov, a, b, k, a[k], seed, 0, n_points=n_points)
        if np.isfinite(b[k]):
            fb[k] = _fk(cov, a, b, k, b[k], seed, 1, n_points=n_points)
    return p, mean + cov @ (fa - fb) / p


def trunc_moments_box(spec: MvnSpec, lower, upper, rng_seed: int = 0) -> TruncatedMoments:
    """Moments of Z ~ spec conditioned on ``lower <= Z <= upper``."""
    d = spec.d
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (d,)).astype(float)
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (d,)).astype(float)
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    if d == 1:
        p, m, v = _box_trunc_uni(spec.mean[0], spec.cov[0, 0], lo[0], hi[0])
        return TruncatedMoments(prob=p, mean=np.array([m]), cov=np.array([[v]]))
    p, m, c = _mw_moments(spec.mean, spec.cov, lo, hi, rng_seed)
    return TruncatedMoments(prob=p, mean=m, cov=c)


def trunc_moments(spec: MvnSpec, lower, rng_seed: int = 0,
                  upper: Optional[np.ndarray] = None) -> TruncatedMoments:
    """Moments of Z ~ spec conditioned on ``Z >= lower`` (componentwise).

    Delegates to :func:`trunc_univariate` for d = 1.  Raises
    :class:`DegenerateTruncationError` when the region probability falls
    below 1e-300; callers treat the region as impossible.
    """
    if upper is None:
        upper = np.full(spec.d, np.inf)
    return trunc_moments_box(spec, lower, upper, rng_seed)
