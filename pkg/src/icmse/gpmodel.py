"""Gaussian-process models for (possibly censored) experimental data.

Three model modes share one linear-algebra core:

* ``STANDARD`` -- plain GP regression on exactly observed responses.
* ``CENSORED_SINGLE`` -- single-fidelity GP conditioned jointly on exact
  observations and right-censoring events, via the truncated-normal moments
  of the censored block.
* ``CENSORED_BIFIDELITY`` -- computer-model GP plus an independent
  discrepancy GP for physical experiments, censoring handled as above.

Data layout is always ``[computer block, observed physical, censored
physical]``; censored rows carry the censoring limit as their recorded
value.  Hyperparameters are estimated by multistart Nelder-Mead over a
Tobit-type likelihood: the Gaussian marginal of the exact observations
times the orthant probability of the censored block given them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateTruncationError, FitError, ModelModeError, NumericalError
from .kernels import LengthscaleParams, gamma_vector
from .tmvn import MvnSpec, _box_prob, trunc_moments

__all__ = [
    "Fidelity",
    "Observation",
    "Hyperparams",
    "ModelMode",
    "FittedModel",
    "Prediction",
    "OptConfig",
    "build_model",
    "predict_standard",
    "predict_censored",
    "predict_bifidelity",
    "censored_loglik",
    "fit_mle",
    "discrepancy_estimate",
    "read_observations_csv",
    "write_observations_csv",
]

NUGGET_SCALE = 1e-8
VAR_CLAMP_TOL = 1e-10
_LOG_CLIP = 25.0
# MLE searches keep theta_l in [0.01, 0.99]: both endpoints are degenerate
# (white-noise and constant kernels) and poison the design criterion
_RATE_LOG_MIN = float(np.log(-4.0 * np.log(0.99)))
_RATE_LOG_MAX = float(np.log(-4.0 * np.log(0.01)))
# measurement error may not absorb the whole response spread: without this
# bound the small-sample MLE collapses to a pure-noise model
_NOISE_VAR_FRACTION = 0.25


class Fidelity(str, Enum):
    COMPUTER = "computer"
    PHYSICAL = "physical"


class ModelMode(str, Enum):
    STANDARD = "standard"
    CENSORED_SINGLE = "censored_single"
    CENSORED_BIFIDELITY = "censored_bifidelity"


@dataclass(frozen=True)
class Observation:
    """One experimental record: input point, response, censoring flag."""

    x: np.ndarray
    value: float
    censored: bool = False
    fidelity: Fidelity = Fidelity.PHYSICAL

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "fidelity", Fidelity(self.fidelity))
        if self.censored and self.fidelity is Fidelity.COMPUTER:
            raise ValueError("computer experiments cannot be censored")


@dataclass(frozen=True)
class Hyperparams:
    """GP prior parameters.

    ``mu``, ``sigma2``, ``theta`` describe the main process (the latent mean
    for single-fidelity data, the computer model for bi-fidelity data);
    ``sigma2_delta``/``theta_delta`` describe the discrepancy process and may
    be zero/None; ``sigma2_eps`` is the physical measurement-noise variance.
    """

    mu: float
    sigma2: float
    theta: LengthscaleParams
    sigma2_eps: float
    sigma2_delta: float = 0.0
    theta_delta: Optional[LengthscaleParams] = None

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError("sigma2 must be positive")
        if self.sigma2_eps < 0.0 or self.sigma2_delta < 0.0:
            raise ValueError("variances must be nonnegative")
        if self.sigma2_delta > 0.0 and self.theta_delta is None:
            raise ValueError("theta_delta required when sigma2_delta > 0")
        if self.theta_delta is not None and self.theta_delta.p != self.theta.p:
            raise ValueError("theta and theta_delta must share the input dimension")

    @property
    def prior_var(self) -> float:
        return self.sigma2 + self.sigma2_delta


@dataclass(frozen=True)
class Prediction:
    mean: float
    var: float


def _clamp_var(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < -VAR_CLAMP_TOL):
        raise NumericalError(
            f"predictive variance {float(v.min()):.3e} below roundoff tolerance"
        )
    return np.maximum(v, 0.0)


def _order_observations(observations: Sequence[Observation]) -> list[Observation]:
    computer = [o for o in observations if o.fidelity is Fidelity.COMPUTER]
    phys_obs = [o for o in observations if o.fidelity is Fidelity.PHYSICAL and not o.censored]
    phys_cen = [o for o in observations if o.fidelity is Fidelity.PHYSICAL and o.censored]
    return computer + phys_obs + phys_cen


def _latent_cov(xa: np.ndarray, mask_a: np.ndarray, xb: np.ndarray, mask_b: np.ndarray,
                params: Hyperparams) -> np.ndarray:
    """Prior covariance of latent observation rows (no noise terms)."""
    diff = xa[:, None, :] - xb[None, :, :]
    sq = diff * diff
    k = params.sigma2 * np.exp(-np.einsum("ijl,l->ij", sq, params.theta.theta_tilde))
    if params.sigma2_delta > 0.0:
        kd = params.sigma2_delta * np.exp(
            -np.einsum("ijl,l->ij", sq, params.theta_delta.theta_tilde)
        )
        k = k + np.outer(mask_a, mask_b) * kd
    return k


def _chol_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))


class FittedModel:
    """Hyperparameters plus cached factorizations and truncated moments.

    Immutable after construction; prediction and criterion evaluation only
    read from it, so instances are safe to share across threads.
    """

    def __init__(self, params: Hyperparams, observations: Sequence[Observation],
                 censor_limit: float, mode: Optional[ModelMode] = None, seed: int = 0,
                 fit_diagnostics: Optional[dict] = None):
        data = _order_observations(observations)
        self.params = params
        self.data = data
        self.censor_limit = float(censor_limit)
        self.seed = int(seed)
        self.fit_diagnostics = fit_diagnostics or {}
        self.n = len(data)
        self.p = params.theta.p
        for obs in data:
            if obs.x.size != self.p:
                raise ValueError(
                    f"observation dimension {obs.x.size} != kernel dimension {self.p}"
                )

        self.X = np.array([o.x for o in data], dtype=float).reshape(self.n, self.p)
        self.phys_mask = np.array([o.fidelity is Fidelity.PHYSICAL for o in data], dtype=bool)
        self.cens_mask = np.array([o.censored for o in data], dtype=bool)
        self.n_cens = int(self.cens_mask.sum())
        self.n_computer = int((~self.phys_mask).sum())
        if self.n_cens and not np.isfinite(self.censor_limit):
            raise ValueError("censored observations require a finite censoring limit")
        self.y = np.array(
            [self.censor_limit if o.censored else o.value for o in data], dtype=float
        )

        if mode is None:
            if self.n_computer > 0:
                mode = ModelMode.CENSORED_BIFIDELITY
            elif self.n_cens > 0:
                mode = ModelMode.CENSORED_SINGLE
            else:
                mode = ModelMode.STANDARD
        self.mode = ModelMode(mode)

        self.prior_var = params.prior_var
        self.nugget = NUGGET_SCALE * self.prior_var
        self._cache: dict = {}
        self._factorize()

    def _factorize(self):
        par = self.params
        n = self.n
        if n == 0:
            self.gamma = np.zeros((0, 0))
            self.gamma_chol = np.zeros((0, 0))
            self.obs_chol = np.zeros((0, 0))
            self.w_obs = np.zeros(0)
            self.B = np.zeros((0, 0))
            self.m_cond = np.zeros(0)
            self.S_cond = np.zeros((0, 0))
            self.resid = np.zeros(0)
            self.A = np.zeros((0, 0))
            self.yc_hat = np.zeros(0)
            self.sigma_c = np.zeros((0, 0))
            self.y_fill = np.zeros(0)
            self.p_cen = 1.0
            return

        gamma = _latent_cov(self.X, self.phys_mask, self.X, self.phys_mask, par)
        gamma[np.diag_indices(n)] += self.nugget + par.sigma2_eps * self.phys_mask
        self.gamma = gamma
        try:
            self.gamma_chol = np.linalg.cholesky(gamma)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"training covariance not positive definite: {exc}") from exc

        cens = self.cens_mask
        obs = ~cens
        if self.n_cens:
            g_oo = gamma[np.ix_(obs, obs)]
            g_oc = gamma[np.ix_(obs, cens)]
            g_cc = gamma[np.ix_(cens, cens)]
            self.obs_chol = np.linalg.cholesky(g_oo)
            self.w_obs = _chol_solve(self.obs_chol, self.y[obs] - par.mu)
            self.B = _chol_solve(self.obs_chol, g_oc)  # (n_obs, n_c)
            self.m_cond = par.mu + g_oc.T @ self.w_obs
            s_cond = g_cc - g_oc.T @ self.B
            self.S_cond = 0.5 * (s_cond + s_cond.T)
            lower = np.full(self.n_cens, self.censor_limit)
            tm = trunc_moments(MvnSpec(self.m_cond, self.S_cond), lower, rng_seed=self.seed)
            self.yc_hat = tm.mean
            self.sigma_c = tm.cov
            self.p_cen = tm.prob
        else:
            self.obs_chol = self.gamma_chol
            self.w_obs = _chol_solve(self.gamma_chol, self.y - par.mu)
            self.B = np.zeros((n, 0))
            self.m_cond = np.zeros(0)
            self.S_cond = np.zeros((0, 0))
            self.yc_hat = np.zeros(0)
            self.sigma_c = np.zeros((0, 0))
            self.p_cen = 1.0

        y_fill = self.y.copy()
        y_fill[cens] = self.yc_hat
        self.y_fill = y_fill
        self.resid = _chol_solve(self.gamma_chol, y_fill - par.mu)

        k_inv = _chol_solve(self.gamma_chol, np.eye(n))
        if self.n_cens:
            kc = k_inv[:, cens]
            a = k_inv - kc @ self.sigma_c @ kc.T
        else:
            a = k_inv
        self.A = 0.5 * (a + a.T)

    # -- prediction core ----------------------------------------------------

    def gamma_new(self, x) -> np.ndarray:
        """Covariance of each training row with the latent mean at x; (n, m)."""
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        if xs.shape[1] != self.p:
            raise ValueError(f"x has dimension {xs.shape[1]}, expected {self.p}")
        if self.n == 0:
            return np.zeros((0, xs.shape[0]))
        return gamma_vector(self.X, xs, self.params, self.phys_mask)

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance of the latent mean at points x."""
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        if self.n == 0:
            m = xs.shape[0]
            return np.full(m, self.params.mu), np.full(m, self.prior_var)
        g = self.gamma_new(xs)
        mean = self.params.mu + g.T @ self.resid
        # triangular-solve form: the censored-block correction is PSD, so the
        # only cancellation sits in prior - |L^-1 g|^2
        z = np.linalg.solve(self.gamma_chol, g)
        var = self.prior_var - np.einsum("im,im->m", z, z)
        if self.n_cens:
            w = np.linalg.solve(self.gamma_chol.T, z)[self.cens_mask, :]
            var = var + np.einsum("im,im->m", w, self.sigma_c @ w)
        return mean, _clamp_var(var)


def build_model(params: Hyperparams, observations: Sequence[Observation],
                censor_limit: float, mode: Optional[ModelMode] = None,
                seed: int = 0) -> FittedModel:
    """Assemble a :class:`FittedModel` from known hyperparameters."""
    return FittedModel(params, observations, censor_limit, mode=mode, seed=seed)


def _predict_one(model: FittedModel, x_new) -> Prediction:
    mean, var = model.predict(np.atleast_2d(np.asarray(x_new, dtype=float)))
    return Prediction(mean=float(mean[0]), var=float(var[0]))


def predict_standard(model: FittedModel, x_new) -> Prediction:
    """Standard GP conditional mean/variance; rejects censored training rows."""
    if model.n_cens > 0:
        raise ModelModeError("predict_standard requires a model without censored rows")
    if model.mode is not ModelMode.STANDARD:
        raise ModelModeError(f"predict_standard not applicable to mode {model.mode}")
    return _predict_one(model, x_new)


def predict_censored(model: FittedModel, x_new) -> Prediction:
    """Censored single-fidelity conditional mean/variance.

    With no censored rows this coincides with :func:`predict_standard`.
    """
    if model.mode is ModelMode.CENSORED_BIFIDELITY:
        raise ModelModeError("predict_censored expects a single-fidelity model")
    return _predict_one(model, x_new)


def predict_bifidelity(model: FittedModel, x_new) -> Prediction:
    if model.mode is not ModelMode.CENSORED_BIFIDELITY:
        raise ModelModeError("predict_bifidelity expects a bi-fidelity model")
    return _predict_one(model, x_new)


def discrepancy_estimate(model_bi: FittedModel, model_computer: FittedModel, x) -> float:
    """Estimated physical-minus-computer discrepancy at x."""
    xi_hat, _ = model_bi.predict(x)
    f_hat, _ = model_computer.predict(x)
    return float(xi_hat[0] - f_hat[0])


# ---------------------------------------------------------------------------
# likelihood and fitting
# ---------------------------------------------------------------------------


_LOGLIK_QMC_POINTS = 2**11


def _loglik_core(X: np.ndarray, phys: np.ndarray, cens: np.ndarray, y: np.ndarray,
                 params: Hyperparams, c: float, seed: int,
                 profile_mu: bool) -> tuple[float, float]:
    """(log-likelihood, mean used); -inf on covariance failure."""
    n = len(y)
    gamma = _latent_cov(X, phys, X, phys, params)
    gamma[np.diag_indices(n)] += NUGGET_SCALE * params.prior_var + params.sigma2_eps * phys
    obs = ~cens
    g_oo = gamma[np.ix_(obs, obs)]
    try:
        chol = np.linalg.cholesky(g_oo)
    except np.linalg.LinAlgError:
        return -np.inf, params.mu
    y_obs = y[obs]
    mu = params.mu
    if profile_mu:
        ones = np.ones(y_obs.size)
        kinv_one = _chol_solve(chol, ones)
        denom = float(ones @ kinv_one)
        if denom > 0.0:
            mu = float(y_obs @ kinv_one / denom)
    z = np.linalg.solve(chol, y_obs - mu)
    ll = (
        -0.5 * float(z @ z)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * y_obs.size * math.log(2.0 * math.pi)
    )
    if cens.any():
        g_oc = gamma[np.ix_(obs, cens)]
        g_cc = gamma[np.ix_(cens, cens)]
        w = np.linalg.solve(chol.T, z)
        m_c = mu + g_oc.T @ w
        b = _chol_solve(chol, g_oc)
        s_c = g_cc - g_oc.T @ b
        s_c = 0.5 * (s_c + s_c.T)
        try:
            prob = _box_prob(s_c, np.full(m_c.size, c) - m_c,
                             np.full(m_c.size, np.inf), seed,
                             n_points=_LOGLIK_QMC_POINTS)
        except (NumericalError, np.linalg.LinAlgError):
            return -np.inf, mu
        if prob <= 0.0:
            return -np.inf, mu
        ll += math.log(prob)
    return (ll if np.isfinite(ll) else -np.inf), mu


def censored_loglik(params: Hyperparams, data: Sequence[Observation], c: float,
                    seed: int = 0) -> float:
    """Tobit-type log-likelihood of (possibly censored) GP data.

    Gaussian log marginal density of the exactly observed block plus the log
    orthant probability of the censored block given it.  Returns ``-inf``
    for covariances that are not positive definite, which keeps the value
    safe to hand to a derivative-free optimizer.
    """
    data = _order_observations(data)
    n_unc = sum(1 for o in data if not o.censored)
    if n_unc < 2:
        raise ValueError("censored_loglik needs at least 2 uncensored observations")
    X = np.array([o.x for o in data], dtype=float)
    phys = np.array([o.fidelity is Fidelity.PHYSICAL for o in data], dtype=bool)
    cens = np.array([o.censored for o in data], dtype=bool)
    y = np.array([c if o.censored else o.value for o in data], dtype=float)
    ll, _ = _loglik_core(X, phys, cens, y, params, c, seed, profile_mu=False)
    return ll


@dataclass
class OptConfig:
    """Multistart Nelder-Mead settings for hyperparameter estimation.

    ``fixed_noise`` pins the measurement-noise variance at a known value
    (the usual situation for calibrated instruments) instead of estimating
    it; the adaptive-design loop passes the experiment's known noise here.
    """

    restarts: int = 10
    max_iters: int = 300
    seed: int = 0
    warm_start: Optional[Hyperparams] = None
    fixed_noise: Optional[float] = None
    # computer-block parameters, reused across refits of a sequential
    # campaign (the computer data never change once collected)
    computer_params: Optional[Hyperparams] = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _nm_minimize(fun, x0: np.ndarray, max_iters: int):
    return minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={"maxiter": max_iters, "xatol": 1e-6, "fatol": 1e-9, "adaptive": False},
    )


def _multistart(objective, starts, max_iters):
    best = None
    values = []
    for s in starts:
        res = _nm_minimize(objective, np.asarray(s, dtype=float), max_iters)
        values.append(float(res.fun))
        if res.fun < 1e299 and (best is None or res.fun < best.fun):
            best = res
    return best, values


def _fit_single(data: Sequence[Observation], c: float, cfg: OptConfig,
                noise_free: bool = False) -> tuple[Hyperparams, dict]:
    """MLE for a single-kernel GP (standard or censored single-fidelity)."""
    p = data[0].x.size
    X = np.array([o.x for o in data], dtype=float)
    phys = np.array([o.fidelity is Fidelity.PHYSICAL for o in data], dtype=bool)
    cens = np.array([o.censored for o in data], dtype=bool)
    y = np.array([c if o.censored else o.value for o in data], dtype=float)
    y_unc = y[~cens]
    scale = max(float(np.var(y_unc)) if y_unc.size > 1 else 1.0, 1e-6)
    mu0 = float(np.mean(y_unc))
    free_mu = bool(cens.any())  # mu profiled in closed form when uncensored

    eps_cap = _NOISE_VAR_FRACTION * scale
    fixed_eps = 0.0 if noise_free else cfg.fixed_noise
    estimate_eps = not noise_free and fixed_eps is None

    def unpack(vec: np.ndarray, mu_value: Optional[float] = None) -> Hyperparams:
        v = np.clip(vec, -_LOG_CLIP, _LOG_CLIP)
        i = 1 if free_mu else 0
        mu = float(np.clip(vec[0], -1e6, 1e6)) if free_mu else (mu_value if mu_value is not None else mu0)
        sigma2 = float(np.exp(v[i]))
        rates = np.exp(np.clip(v[i + 1: i + 1 + p], _RATE_LOG_MIN, _RATE_LOG_MAX))
        if estimate_eps:
            sigma2_eps = float(min(np.exp(v[i + 1 + p]), eps_cap))
        else:
            sigma2_eps = float(fixed_eps or 0.0)
        return Hyperparams(
            mu=mu, sigma2=sigma2,
            theta=LengthscaleParams.from_rates(rates),
            sigma2_eps=sigma2_eps,
        )

    def objective(vec: np.ndarray) -> float:
        try:
            params = unpack(vec)
        except (ValueError, NumericalError):
            return 1e300
        ll, _ = _loglik_core(X, phys, cens, y, params, c, cfg.seed, profile_mu=not free_mu)
        return -ll if np.isfinite(ll) else 1e300

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 101]))
    base = ([mu0] if free_mu else []) + [math.log(scale), *([math.log(5.0)] * p)]
    if estimate_eps:
        base.append(math.log(0.05 * scale + 1e-8))
    base = np.array(base)
    starts = []
    if cfg.warm_start is not None:
        w = cfg.warm_start
        vec = ([w.mu] if free_mu else []) + [math.log(w.sigma2), *np.log(w.theta.theta_tilde)]
        if estimate_eps:
            vec.append(math.log(max(w.sigma2_eps, 1e-10)))
        starts.append(np.array(vec))
    starts.append(base)
    while len(starts) < cfg.restarts:
        cand = base + rng.uniform(-2.0, 2.0, size=base.size)
        if free_mu:
            cand[0] = mu0 + rng.uniform(-1.0, 1.0) * math.sqrt(scale)
        starts.append(cand)

    best, values = _multistart(objective, starts[: cfg.restarts], cfg.max_iters)
    if best is None:
        raise FitError("all restarts returned non-finite likelihood",
                       {"restart_values": values})
    params = unpack(best.x)
    if not free_mu:
        _, mu_hat = _loglik_core(X, phys, cens, y, params, c, cfg.seed, profile_mu=True)
        params = unpack(best.x, mu_value=mu_hat)
    return params, {"neg_loglik": float(best.fun), "restart_values": values}


def _fit_bifidelity(data: Sequence[Observation], c: float,
                    cfg: OptConfig) -> tuple[Hyperparams, dict]:
    computer = [o for o in data if o.fidelity is Fidelity.COMPUTER]
    physical = [o for o in data if o.fidelity is Fidelity.PHYSICAL]
    if not computer:
        raise FitError("bi-fidelity fit requires a nonempty computer block")
    p = computer[0].x.size

    if cfg.computer_params is not None:
        w = cfg.computer_params
        f_params = Hyperparams(mu=w.mu, sigma2=w.sigma2, theta=w.theta, sigma2_eps=0.0)
        f_diag = {"reused": True}
    else:
        warm_f = None
        if cfg.warm_start is not None:
            w = cfg.warm_start
            warm_f = Hyperparams(mu=w.mu, sigma2=w.sigma2, theta=w.theta, sigma2_eps=0.0)
        f_params, f_diag = _fit_single(
            computer, c=np.inf, cfg=replace(cfg, warm_start=warm_f), noise_free=True,
        )

    if not physical:
        # no physical data yet: discrepancy off, weak default noise level
        default_eps = cfg.fixed_noise if cfg.fixed_noise is not None \
            else 1e-2 * f_params.sigma2
        params = replace(f_params, sigma2_eps=float(default_eps))
        return params, {"computer": f_diag}

    X = np.array([o.x for o in data], dtype=float)
    phys = np.array([o.fidelity is Fidelity.PHYSICAL for o in data], dtype=bool)
    cens = np.array([o.censored for o in data], dtype=bool)
    y = np.array([c if o.censored else o.value for o in data], dtype=float)
    y_phys = np.array([o.value for o in physical if not o.censored], dtype=float)
    scale = max(float(np.var(y_phys)) if y_phys.size > 1 else 0.05 * f_params.sigma2, 1e-6)

    eps_cap = _NOISE_VAR_FRACTION * scale
    estimate_eps = cfg.fixed_noise is None

    def unpack(vec: np.ndarray) -> Hyperparams:
        v = np.clip(vec, -_LOG_CLIP, _LOG_CLIP)
        if estimate_eps:
            eps = float(min(np.exp(v[1 + p]), eps_cap))
        else:
            eps = float(cfg.fixed_noise)
        return replace(
            f_params,
            sigma2_delta=float(np.exp(v[0])),
            theta_delta=LengthscaleParams.from_rates(
                np.exp(np.clip(v[1: 1 + p], _RATE_LOG_MIN, _RATE_LOG_MAX))),
            sigma2_eps=eps,
        )

    def objective(vec: np.ndarray) -> float:
        try:
            params = unpack(vec)
        except (ValueError, NumericalError):
            return 1e300
        ll, _ = _loglik_core(X, phys, cens, y, params, c, cfg.seed, profile_mu=False)
        return -ll if np.isfinite(ll) else 1e300

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 202]))
    base = [math.log(min(0.2 * f_params.sigma2, delta_cap) + 1e-8)]
    if not fix_theta_delta:
        base += [math.log(3.0)] * p
    if estimate_eps:
        base.append(math.log(0.1 * scale + 1e-8))
    base = np.array(base)
    starts = []
    w = cfg.warm_start
    if w is not None and w.sigma2_delta > 0.0 and w.theta_delta is not None:
        vec = [math.log(w.sigma2_delta)]
        if not fix_theta_delta:
            vec += list(np.log(w.theta_delta.theta_tilde))
        if estimate_eps:
            vec.append(math.log(max(w.sigma2_eps, 1e-10)))
        starts.append(np.array(vec))
    starts.append(base)
    while len(starts) < cfg.restarts:
        starts.append(base + rng.uniform(-2.5, 2.5, size=base.size))

    best, values = _multistart(objective, starts[: cfg.restarts], cfg.max_iters)
    if best is None:
        raise FitError("all bi-fidelity restarts returned non-finite likelihood",
                       {"restart_values": values, "computer": f_diag})
    return unpack(best.x), {
        "neg_loglik": float(best.fun),
        "restart_values": values,
        "computer": f_diag,
    }


def fit_mle(data: Sequence[Observation], c: float, mode: Optional[ModelMode] = None,
            opt_config: Optional[OptConfig] = None) -> FittedModel:
    """Maximum-likelihood fit; returns a model with refreshed caches.

    Deterministic for a fixed ``opt_config.seed``.  Bi-fidelity data are fit
    in two stages: the computer-model parameters from the (noise-free)
    computer block, then discrepancy and noise parameters from the full
    censored likelihood with the computer parameters held fixed.
    """
    if not data:
        raise ValueError("fit_mle requires at least one observation")
    cfg = opt_config or OptConfig()
    data = _order_observations(data)
    if mode is None:
        if any(o.fidelity is Fidelity.COMPUTER for o in data):
            mode = ModelMode.CENSORED_BIFIDELITY
        elif any(o.censored for o in data):
            mode = ModelMode.CENSORED_SINGLE
        else:
            mode = ModelMode.STANDARD
    mode = ModelMode(mode)
    if mode is ModelMode.CENSORED_BIFIDELITY:
        params, diag = _fit_bifidelity(data, c, cfg)
    else:
        params, diag = _fit_single(data, c, cfg)
    return FittedModel(params, data, censor_limit=c, mode=mode, seed=cfg.seed,
                       fit_diagnostics=diag)


# ---------------------------------------------------------------------------
# observation CSV format: x1,...,xp,y,censored,fidelity
# ---------------------------------------------------------------------------


def write_observations_csv(fileobj_or_path, observations: Iterable[Observation]) -> None:
    observations = list(observations)
    if not observations:
        raise ValueError("no observations to write")
    p = observations[0].x.size

    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(p)] + ["y", "censored", "fidelity"])
        for o in observations:
            writer.writerow(
                [repr(float(v)) for v in o.x]
                + [repr(float(o.value)), int(o.censored), o.fidelity.value]
            )

    if isinstance(fileobj_or_path, (str, bytes)) or hasattr(fileobj_or_path, "__fspath__"):
        with open(fileobj_or_path, "w", encoding="utf-8", newline="") as fh:
            _write(fh)
    else:
        _write(fileobj_or_path)


def read_observations_csv(fileobj_or_path) -> list[Observation]:
    def _read(fh) -> list[Observation]:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty observation CSV")
        if len(header) < 4 or [h.strip() for h in header[-3:]] != ["y", "censored", "fidelity"]:
            raise ValueError(f"unexpected CSV header {header}")
        p = len(header) - 3
        out = []
        for row in reader:
            if not row:
                continue
            if len(row) != p + 3:
                raise ValueError(f"row has {len(row)} fields, expected {p + 3}")
            flag = row[p + 1].strip()
            if flag not in {"0", "1"}:
                raise ValueError(f"censored flag must be 0 or 1, got {flag!r}")
            out.append(Observation(
                x=np.array([float(v) for v in row[:p]]),
                value=float(row[p]),
                censored=flag == "1",
                fidelity=Fidelity(row[p + 2].strip()),
            ))
        return out

    if isinstance(fileobj_or_path, (str, bytes)) or hasattr(fileobj_or_path, "__fspath__"):
        with open(fileobj_or_path, "r", encoding="utf-8", newline="") as fh:
            return _read(fh)
    return _read(fileobj_or_path)
