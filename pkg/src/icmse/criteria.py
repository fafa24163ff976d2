"""Design criteria for sequential experiments under right-censoring.

The integrated censored mean-squared error (ICMSE) criterion scores a
candidate input by the expected post-observation integrated predictive
variance, where the expectation accounts for the new observation possibly
being censored.  Three evaluation routes are provided:

* :func:`icmse_nocensor_training` -- explicit form when the training data
  contain no censored rows: the IMSE variance-reduction term damped by the
  censoring adjustment function :func:`h_adjust`.
* :func:`icmse_general` -- the general form through the weighting matrix
  ``H_c`` assembled from truncated-normal moments, evaluated either as a
  closed-form trace against the unit-cube integral matrix (product Gaussian
  kernels) or by direct quadrature.
* :func:`imse_baseline` -- classical IMSE variants that ignore censoring of
  the new observation (Impute / Cen).

Evaluation metrics (RMSE, interval score) live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateTruncationError, ModelModeError, NumericalError
from .gpmodel import FittedModel, _chol_solve, _latent_cov
from .kernels import (
    gamma_vector,
    lambda_border,
    lambda_matrix,
    unit_cube_nodes,
)
from .tmvn import _box_prob, _box_trunc_uni, _mw_mean, _mw_moments

__all__ = [
    "CriterionEval",
    "HcMatrix",
    "h_adjust",
    "hc_matrix",
    "icmse_nocensor_training",
    "icmse_general",
    "imse_baseline",
    "rmse",
    "interval_score",
    "mean_interval_score",
]

_LAMBDA_EPS = 1e-10
# QMC budget for the truncated-moment machinery inside criterion evaluation;
# optimization needs ~1e-3 relative accuracy, not the full reporting budget
_HC_QMC_POINTS = 2**11

HcCorner = Literal["squared_diff", "product"]
Integration = Literal["closed_form", "quadrature"]


@dataclass(frozen=True)
class CriterionEval:
    """Criterion value at one candidate plus diagnostic parts.

    ``value`` omits the additive constant (the integrated current variance)
    unless ``constant_included`` is set; dropping it does not move the
    argmin.  ``lam`` is the posterior censoring probability of the candidate
    and ``trace_term`` the variance-reduction part.
    """

    value: float
    lam: float
    trace_term: float
    constant_included: bool


@dataclass(frozen=True)
class HcMatrix:
    """Variance-reduction weighting matrix for the general ICMSE criterion.

    ``shift`` carries the two-point mean-difference vector embedded in the
    (n+1)-dimensional row space (zero off the censored/candidate block); it
    is None when the candidate is almost surely censored or uncensored.
    """

    matrix: np.ndarray
    lam: float
    y_gt: float
    y_lt: float
    shift: Optional[np.ndarray] = None


def h_adjust(z: float) -> float:
    """Censoring adjustment function; increases from 0 to 1.

    ``h(z) = Phi(z) - z phi(z) + phi(z)^2 / (1 - Phi(z))``.  For positive z
    the complement ``1 - h = sf + z phi - phi^2/sf`` is formed from small
    positive terms, which keeps 1 - h resolvable down to one ulp of 1.0;
    beyond that h saturates at exactly 1.0 (the correctly rounded value).
    """
    z = float(z)
    if not np.isfinite(z):
        raise ValueError("z must be finite")
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if z <= 0.0:
        return float(ndtr(z)) - z * phi + phi * phi / float(ndtr(-z))
    sf = float(ndtr(-z))
    if sf == 0.0:
        return 1.0
    complement = sf + z * phi - phi * (phi / sf)
    return 1.0 - max(complement, 0.0)


# ---------------------------------------------------------------------------
# candidate-dependent joint quantities
# ---------------------------------------------------------------------------


# cap on the number of censored coordinates conditioned jointly with the
# candidate; the least-correlated ones interact negligibly with it and drop
# out of the weighting matrix in the uncorrelated limit
_HC_MAX_CONDITIONING = 5


def _candidate_joint(model: FittedModel, x_next: np.ndarray,
                     max_censored: Optional[int] = None):
    """Conditional law of [censored block, new latent response] given the
    exactly observed rows, together with the full Gamma_{n+1} pieces.

    Returns ``(g_all, joint_mean, joint_cov, m_y, s_yy, sel)`` where ``sel``
    indexes the censored coordinates kept in the joint (all of them unless
    ``max_censored`` trims to the most candidate-correlated ones).
    """
    par = model.params
    x = np.atleast_1d(np.asarray(x_next, dtype=float)).reshape(1, model.p)
    cand_mask = np.ones(1, dtype=bool)  # the candidate is a physical run
    g_all = _latent_cov(model.X, model.phys_mask, x, cand_mask, par)[:, 0] if model.n else np.zeros(0)
    s_prior = par.prior_var + par.sigma2_eps + model.nugget

    obs = ~model.cens_mask
    v_obs = g_all[obs]
    u = _chol_solve(model.obs_chol, v_obs) if model.n else np.zeros(0)
    m_y = par.mu + float(v_obs @ model.w_obs) if model.n else par.mu
    s_yy = s_prior - float(v_obs @ u) if model.n else s_prior

    sel = np.arange(model.n_cens)
    if model.n_cens:
        g_cand_c = g_all[model.cens_mask]
        s_cy = g_cand_c - model.B.T @ v_obs
        if max_censored is not None and model.n_cens > max_censored:
            corr = np.abs(s_cy) / np.sqrt(np.diag(model.S_cond) * s_yy)
            sel = np.sort(np.argsort(-corr)[:max_censored])
        k = sel.size
        joint_mean = np.concatenate([model.m_cond[sel], [m_y]])
        joint_cov = np.zeros((k + 1, k + 1))
        joint_cov[:-1, :-1] = model.S_cond[np.ix_(sel, sel)]
        joint_cov[:-1, -1] = s_cy[sel]
        joint_cov[-1, :-1] = s_cy[sel]
        joint_cov[-1, -1] = s_yy
    else:
        joint_mean = np.array([m_y])
        joint_cov = np.array([[s_yy]])
    return g_all, joint_mean, joint_cov, m_y, s_yy, sel


def _model_cache(model: FittedModel, key: str, factory):
    if key not in model._cache:
        model._cache[key] = factory()
    return model._cache[key]


def _lambda_n(model: FittedModel) -> np.ndarray:
    return _model_cache(
        model, "lambda_n",
        lambda: lambda_matrix(model.X, model.params, model.phys_mask)
        if model.n
        else np.zeros((0, 0)),
    )


def sigma_bar2(model: FittedModel) -> float:
    """Integrated current predictive variance over the unit cube."""
    def compute():
        if model.n == 0:
            return model.prior_var
        return model.prior_var - float(np.sum(model.A * _lambda_n(model)))

    return _model_cache(model, "sigma_bar2", compute)


def _lambda_full(model: FittedModel, x_next: np.ndarray) -> np.ndarray:
    lam_n = _lambda_n(model)
    row, corner = lambda_border(model.X, x_next, model.params, model.phys_mask,
                                flag_new=True)
    out = np.empty((model.n + 1, model.n + 1))
    out[: model.n, : model.n] = lam_n
    out[: model.n, -1] = row
    out[-1, : model.n] = row
    out[-1, -1] = corner
    return out


def _gamma_next_chol(model: FittedModel, g_all: np.ndarray, s_prior: float) -> np.ndarray:
    n = model.n
    full = np.empty((n + 1, n + 1))
    full[:n, :n] = model.gamma
    full[:n, -1] = g_all
    full[-1, :n] = g_all
    full[-1, -1] = s_prior
    try:
        return np.linalg.cholesky(full)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"candidate covariance not positive definite: {exc}") from exc


# ---------------------------------------------------------------------------
# H_c assembly
# ---------------------------------------------------------------------------


def _sanitize_trunc_cov(cov: np.ndarray, diag_cap: np.ndarray) -> np.ndarray:
    """Repair a numerically degenerate truncated covariance.

    Truncation of a Gaussian to a convex region cannot inflate variances, so
    diagonal entries are capped at the untruncated ones; negative eigenvalues
    from near-vanishing regions are clipped away.
    """
    d = cov.shape[0]
    out = 0.5 * (cov + cov.T)
    diag_cap = np.maximum(np.asarray(diag_cap, dtype=float), 0.0)
    diag = np.diag(out).copy()
    bad = (diag > diag_cap) | (diag < 0.0)
    if np.any(bad):
        safe = np.where(diag > 0.0, diag, diag_cap)
        scale = np.ones(d)
        scale[bad] = np.sqrt(diag_cap[bad] / np.maximum(safe[bad], 1e-300))
        out = out * np.outer(scale, scale)
    w, v = np.linalg.eigh(out)
    if w[0] < -1e-12 * max(float(w[-1]), 1.0):
        out = (v * np.maximum(w, 0.0)) @ v.T
        out = 0.5 * (out + out.T)
    return out


def hc_matrix(model: FittedModel, x_next, seed: int = 0,
              corner: HcCorner = "squared_diff",
              n_points: int = _HC_QMC_POINTS) -> HcMatrix:
    """Censoring-weighting matrix for the variance-reduction quadratic form.

    Assembles, from truncated-normal moments of the joint conditional law of
    the censored block and the candidate's latent response: the censoring
    probability ``lam`` (ratio of orthant probabilities), the truncated
    means ``y_gt``/``y_lt`` of the candidate response above/below the limit,
    the truncated covariance with the candidate's uncensored event, and the
    plug-in approximation of the expected censored-block covariance.  Only
    the censored-block/candidate principal submatrix is nonzero.
    """
    if model.n == 0:
        raise ValueError("hc_matrix requires a model with training data")
    c = model.censor_limit
    n = model.n
    _, joint_mean, joint_cov, m_y, s_yy, sel = _candidate_joint(
        model, x_next, max_censored=_HC_MAX_CONDITIONING)
    n_c = sel.size
    d = n_c + 1
    hmat = np.zeros((n + 1, n + 1))
    cens_idx = np.where(model.cens_mask)[0][sel]
    block = np.ix_(
        np.concatenate([cens_idx, [n]]),
        np.concatenate([cens_idx, [n]]),
    )

    if not np.isfinite(c):
        # no censoring anywhere: the reduction weight is the full conditional
        # variance of the new response
        sigma1 = (
            _mw_moments(joint_mean, joint_cov, np.full(d, -np.inf), np.full(d, np.inf),
                        seed, n_points=n_points)[2]
            if d > 1
            else joint_cov
        )
        hmat[block] = sigma1
        return HcMatrix(matrix=hmat, lam=0.0, y_gt=c, y_lt=m_y)

    lower_train = np.full(d, c, dtype=float)
    lower_train[-1] = -np.inf

    # censoring probability of the candidate given all data
    if n_c:
        if n_c == model.n_cens:
            p_den = model.p_cen
        else:
            key = ("p_cen_sub", tuple(int(i) for i in sel))
            p_den = _model_cache(model, key, lambda: _box_prob(
                model.S_cond[np.ix_(sel, sel)],
                np.full(n_c, c) - model.m_cond[sel],
                np.full(n_c, np.inf), model.seed, n_points=n_points))
        num = _box_prob(joint_cov, np.full(d, c) - joint_mean, np.full(d, np.inf), seed,
                        n_points=n_points)
        lam = min(max(num / max(p_den, 1e-300), 0.0), 1.0)
    else:
        lam = float(ndtr((m_y - c) / math.sqrt(s_yy)))

    if lam >= 1.0 - _LAMBDA_EPS:
        # a run here is censored almost surely: no variance reduction
        return HcMatrix(matrix=hmat, lam=1.0, y_gt=max(m_y, c), y_lt=c)

    sd_joint = np.sqrt(np.diag(joint_cov))
    sd_y = float(sd_joint[-1])
    mean_above = joint_mean
    if lam <= _LAMBDA_EPS:
        lam_eff = 0.0
        y_gt = c
    else:
        lam_eff = lam
        if d == 1:
            _, y_gt, _ = _box_trunc_uni(m_y, s_yy, c, np.inf)
            mean_above = np.array([y_gt])
        else:
            _, mean_above = _mw_mean(joint_mean, joint_cov, np.full(d, c),
                                     np.full(d, np.inf), seed, n_points=n_points)
            y_gt = float(mean_above[-1])
        # physically valid windows; wild values indicate an unresolvably
        # small truncation region
        mean_above = np.clip(mean_above, joint_mean - 6.0 * sd_joint,
                             joint_mean + 6.0 * sd_joint)
        y_gt = min(max(y_gt, c), max(m_y, c) + 6.0 * sd_y)
        mean_above = np.concatenate([mean_above[:-1], [y_gt]])

    # truncated moments with the candidate's *uncensored* event (the
    # variance-of-conditional-mean decomposition conditions the reduction
    # branch on the new response staying below the limit); its last mean
    # component is the expected response below the limit
    upper = np.full(d, np.inf)
    upper[-1] = c
    if d == 1:
        p_below, y_lt, v1 = _box_trunc_uni(m_y, s_yy, -np.inf, c)
        mean_below = np.array([y_lt])
        sigma1 = np.array([[v1]])
    else:
        p_below, mean_below, sigma1 = _mw_moments(joint_mean, joint_cov, lower_train,
                                                  upper, seed, n_points=n_points)
        y_lt = float(mean_below[-1])
    mean_below = np.clip(mean_below, joint_mean - 6.0 * sd_joint,
                         joint_mean + 6.0 * sd_joint)
    y_lt = min(max(y_lt, min(m_y, c) - 6.0 * sd_y), c)
    mean_below = np.concatenate([mean_below[:-1], [y_lt]])
    # the uncensored branch is numerically unresolvable when its region
    # carries almost none of the training-event mass: no usable reduction
    if p_below < 1e-8 * max(model.p_cen if n_c == model.n_cens else 1.0, 1e-300):
        return HcMatrix(matrix=hmat, lam=max(lam, 1.0 - _LAMBDA_EPS),
                        y_gt=max(m_y, c), y_lt=c)
    sigma1 = _sanitize_trunc_cov(sigma1, np.diag(joint_cov))

    # plug-in: censored-block covariance given the expected uncensored response
    if n_c:
        s_cond_sel = model.S_cond[np.ix_(sel, sel)]
        s_cy = joint_cov[:-1, -1]
        k_gain = s_cy / s_yy
        m_plug = model.m_cond[sel] + k_gain * (y_lt - m_y)
        s_plug = s_cond_sel - np.outer(k_gain, s_cy)
        s_plug = 0.5 * (s_plug + s_plug.T)
        # Schur complement is PSD up to roundoff; keep the moments callable
        floor = 1e-12 * np.diag(s_cond_sel)
        np.fill_diagonal(s_plug, np.maximum(np.diag(s_plug), floor))
        if n_c == 1:
            _, _, vhat = _box_trunc_uni(float(m_plug[0]), float(s_plug[0, 0]), c, np.inf)
            sigma_hat_cc = np.array([[vhat]])
        else:
            _, _, sigma_hat_cc = _mw_moments(
                m_plug, s_plug, np.full(n_c, c), np.full(n_c, np.inf), seed,
                n_points=n_points,
            )
        sigma_hat_cc = _sanitize_trunc_cov(sigma_hat_cc, np.diag(s_plug))
        sigma_hat = np.zeros((d, d))
        sigma_hat[:-1, :-1] = sigma_hat_cc
    else:
        sigma_hat = np.zeros((d, d))

    core = (1.0 - lam_eff) * (sigma1 - sigma_hat)
    shift_emb = None
    if lam_eff > 0.0:
        if corner == "squared_diff":
            # two-point variance of the conditional mean: the full difference
            # vector keeps the censored-block shifts, which cancel the
            # exploding kriging weights when a candidate collides with an
            # existing censored run (the diagonal-only form is its limit for
            # well-separated candidates)
            shift = mean_above - mean_below
            core += lam_eff * (1.0 - lam_eff) * np.outer(shift, shift)
            shift_emb = np.zeros(n + 1)
            shift_emb[np.concatenate([cens_idx, [n]])] = shift
        elif corner == "product":
            core[-1, -1] += lam_eff * (1.0 - lam_eff) * y_gt * y_lt
        else:
            raise ValueError(f"unknown corner form {corner!r}")
    hmat[block] = core
    return HcMatrix(matrix=hmat, lam=lam, y_gt=y_gt, y_lt=y_lt, shift=shift_emb)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def _reduction_vector(model: FittedModel, g_all: np.ndarray, through_a: bool) -> np.ndarray:
    """v with gamma_{n+1,new}(x)^T v = Cov(new response, latent mean at x | data)."""
    head = -(model.A @ g_all) if through_a else -_chol_solve(model.gamma_chol, g_all)
    return np.concatenate([head, [1.0]])


def _quadrature_value(model: FittedModel, x_next: np.ndarray, u_mat: np.ndarray,
                      seed: int) -> float:
    """Direct integration of sigma^2_new - gamma^T U gamma over the cube."""
    nodes, wts = unit_cube_nodes(model.p, seed=seed)
    pts = np.vstack([model.X, x_next.reshape(1, model.p)])
    flags = np.concatenate([model.phys_mask, [True]])
    g_full = gamma_vector(pts, nodes, model.params, flags)  # (n+1, N)
    g_train = g_full[: model.n, :]
    s2 = model.prior_var - np.einsum("im,im->m", g_train, model.A @ g_train)
    red = np.einsum("im,im->m", g_full, u_mat @ g_full)
    return float(np.sum(wts * (s2 - red)))


def icmse_nocensor_training(model: FittedModel, x_next, c: float,
                            integration: Integration = "closed_form") -> CriterionEval:
    """ICMSE when the training data contain no censored rows.

    The integrated variance-reduction term of the classical IMSE criterion
    is damped by ``h(z_c)`` with ``z_c`` the normalized censoring limit
    under the candidate's posterior predictive law.
    """
    if model.n_cens > 0:
        raise ModelModeError("icmse_nocensor_training requires uncensored training data")
    x = np.atleast_1d(np.asarray(x_next, dtype=float))
    g_all, _, _, m_y, s_yy, _ = _candidate_joint(model, x)
    z_c = (c - m_y) / math.sqrt(s_yy) if np.isfinite(c) else np.inf
    h = 1.0 if z_c == np.inf else (0.0 if z_c == -np.inf else h_adjust(z_c))
    lam = 0.0 if z_c == np.inf else (1.0 if z_c == -np.inf else float(ndtr(-z_c)))

    if integration == "closed_form":
        v = _reduction_vector(model, g_all, through_a=False)
        reduction = float(v @ _lambda_full(model, x) @ v) / s_yy
        sbar = sigma_bar2(model)
        return CriterionEval(
            value=sbar - h * reduction, lam=lam, trace_term=h * reduction,
            constant_included=True,
        )
    if integration != "quadrature":
        raise ValueError(f"unknown integration method {integration!r}")
    v = _reduction_vector(model, g_all, through_a=False)
    u_mat = h * np.outer(v, v) / s_yy
    value = _quadrature_value(model, x, u_mat, seed=model.seed)
    return CriterionEval(value=value, lam=lam, trace_term=np.nan, constant_included=True)


def icmse_general(model: FittedModel, x_next, integration: Integration = "closed_form",
                  seed: int = 0, include_constant: bool = True,
                  corner: HcCorner = "squared_diff") -> CriterionEval:
    """General ICMSE criterion for censored (single- or bi-fidelity) models.

    ``closed_form`` evaluates the trace identity against the unit-cube
    integral matrix (product Gaussian kernels); ``quadrature`` integrates
    the quadratic form directly.  A degenerate truncation region marks the
    candidate as uninformative (``+inf`` value), which is safe to minimize
    over.
    """
    x = np.atleast_1d(np.asarray(x_next, dtype=float))
    try:
        hc = hc_matrix(model, x, seed=seed, corner=corner)
    except DegenerateTruncationError:
        return CriterionEval(value=math.inf, lam=1.0, trace_term=0.0,
                             constant_included=include_constant)
    g_all, _, _, _, s_yy, _ = _candidate_joint(model, x)
    s_prior = model.params.prior_var + model.params.sigma2_eps + model.nugget
    chol = _gamma_next_chol(model, g_all, s_prior)
    u_mat = _chol_solve(chol, _chol_solve(chol, hc.matrix).T)

    lam_full = _lambda_full(model, x)
    # A censored observation is a garbling of the exact one, so (under the
    # plug-in linearization) its variance reduction cannot exceed the
    # uncensored-branch share of the exact-observation reduction plus the
    # two-point mean-shift term.  The bound involves no truncated moments,
    # which makes it the stable ceiling for the H_c quadratic form when
    # candidates collide with censored design points.
    v = _reduction_vector(model, g_all, through_a=True)
    red_exact = float(v @ lam_full @ v) / s_yy
    if hc.shift is not None:
        gs = _chol_solve(chol, hc.shift)
        corner_part = hc.lam * (1.0 - hc.lam) * float(gs @ lam_full @ gs)
    else:
        e_vec = np.zeros(model.n + 1)
        e_vec[-1] = 1.0
        ge = _chol_solve(chol, e_vec)
        corner_part = hc.lam * (1.0 - hc.lam) * abs(hc.y_gt * hc.y_lt) \
            * float(ge @ lam_full @ ge)
    cap = max((1.0 - hc.lam) * red_exact + corner_part, 0.0)

    if integration == "closed_form":
        trace = float(np.sum(u_mat * lam_full))
        if not np.isfinite(trace):
            return CriterionEval(value=math.inf, lam=hc.lam, trace_term=trace,
                                 constant_included=include_constant)
        trace = min(max(trace, 0.0), cap)
        sbar = sigma_bar2(model)
        value = (sbar - trace) if include_constant else -trace
        return CriterionEval(value=value, lam=hc.lam, trace_term=trace,
                             constant_included=include_constant)
    if integration != "quadrature":
        raise ValueError(f"unknown integration method {integration!r}")
    nodes, wts = unit_cube_nodes(model.p, seed=seed)
    pts = np.vstack([model.X, x.reshape(1, model.p)])
    flags = np.concatenate([model.phys_mask, [True]])
    g_full = gamma_vector(pts, nodes, model.params, flags)
    g_train = g_full[: model.n, :]
    s2 = model.prior_var - np.einsum("im,im->m", g_train, model.A @ g_train)
    red = np.einsum("im,im->m", g_full, u_mat @ g_full)
    reduction = min(max(float(np.sum(wts * red)), 0.0), cap)
    value = float(np.sum(wts * s2)) - reduction
    return CriterionEval(value=value, lam=hc.lam, trace_term=reduction,
                         constant_included=True)


def imse_baseline(model: FittedModel, x_next, variant: Literal["impute", "cen"] = "cen",
                  integration: Integration = "closed_form") -> CriterionEval:
    """IMSE criterion ignoring censoring of the new observation.

    ``impute`` expects a model refitted with censored values treated as
    exact (its data must carry no censored rows); ``cen`` scores the
    variance reduction under the censored GP itself.
    """
    variant = variant.lower()
    if variant not in {"impute", "cen"}:
        raise ValueError(f"unknown IMSE variant {variant!r}")
    if variant == "impute" and model.n_cens > 0:
        raise ModelModeError("IMSE-Impute expects a model without censored rows")
    x = np.atleast_1d(np.asarray(x_next, dtype=float))
    g_all, _, _, m_y, s_yy, _ = _candidate_joint(model, x)
    v = _reduction_vector(model, g_all, through_a=True)
    c = model.censor_limit
    lam = float(ndtr((m_y - c) / math.sqrt(s_yy))) if np.isfinite(c) else 0.0
    if integration == "closed_form":
        reduction = float(v @ _lambda_full(model, x) @ v) / s_yy
        return CriterionEval(value=sigma_bar2(model) - reduction, lam=lam,
                             trace_term=reduction, constant_included=True)
    if integration != "quadrature":
        raise ValueError(f"unknown integration method {integration!r}")
    u_mat = np.outer(v, v) / s_yy
    value = _quadrature_value(model, x, u_mat, seed=model.seed)
    return CriterionEval(value=value, lam=lam, trace_term=np.nan, constant_included=True)


# ---------------------------------------------------------------------------
# evaluation metrics
# ---------------------------------------------------------------------------


def rmse(predictions, truths) -> float:
    """Root mean-squared error between two equal-length vectors."""
    pred = np.asarray(predictions, dtype=float)
    true = np.asarray(truths, dtype=float)
    if pred.shape != true.shape or pred.size == 0:
        raise ValueError("predictions and truths must be nonempty and equal-length")
    return float(np.sqrt(np.mean((pred - true) ** 2)))


def interval_score(lower: float, upper: float, truth: float, alpha: float) -> float:
    """Interval score: width plus 2/alpha-weighted coverage penalties."""
    if lower > upper:
        raise ValueError(f"lower {lower} exceeds upper {upper}")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(
        (upper - lower)
        + (2.0 / alpha) * max(lower - truth, 0.0)
        + (2.0 / alpha) * max(truth - upper, 0.0)
    )


def mean_interval_score(means, stds, truths, alpha: float = 0.32) -> float:
    """Mean interval score of the one-standard-deviation predictive band."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if not (means.shape == stds.shape == truths.shape) or means.size == 0:
        raise ValueError("inputs must be nonempty and equal-length")
    lo = means - stds
    hi = means + stds
    return float(np.mean(
        (hi - lo)
        + (2.0 / alpha) * np.maximum(lo - truths, 0.0)
        + (2.0 / alpha) * np.maximum(truths - hi, 0.0)
    ))
