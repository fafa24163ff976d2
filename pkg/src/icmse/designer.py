"""Sequential design engine: initial designs, criterion optimization, and
the adaptive campaign loop with its benchmark problems.

The campaign loop alternates maximum-likelihood refits with criterion
minimization (multistart Nelder-Mead, candidates folded into the unit cube
by coordinate reflection), feeding simulated noisy responses through the
censoring limit.  Everything is deterministic for a fixed seed, including
the quasi-Monte Carlo sub-seeds used by criterion evaluation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .criteria import (
    CriterionEval,
    icmse_general,
    icmse_nocensor_training,
    imse_baseline,
    mean_interval_score,
    rmse,
)
from .errors import FitError, ProposalError
from .gpmodel import (
    Fidelity,
    FittedModel,
    Hyperparams,
    ModelMode,
    Observation,
    OptConfig,
    fit_mle,
)

__all__ = [
    "DesignMethod",
    "DesignConfig",
    "CampaignHistory",
    "Problem",
    "PROBLEMS",
    "initial_design",
    "sobol_points",
    "propose_next",
    "impute_model",
    "seq_maxpro_objective",
    "run_campaign_sim",
    "run_benchmark",
    "testfn_xi_1d",
    "testfn_f_1d",
    "testfn_xi_2d",
    "testfn_f_2d",
    "reflect_to_unit",
]


class DesignMethod(str, Enum):
    ICMSE = "icmse"
    IMSE_IMPUTE = "imse_impute"
    IMSE_CEN = "imse_cen"
    SEQ_MAXPRO = "seq_maxpro"


@dataclass
class DesignConfig:
    """Settings of one sequential-design campaign."""

    p: int
    n_ini: int
    n_seq: int
    c: float
    bifidelity: bool = False
    method: DesignMethod = DesignMethod.ICMSE
    restarts: int = 10
    seed: int = 0
    fit_restarts: int = 6
    nm_max_iters: int = 200
    sigma2_eps: Optional[float] = None  # known measurement-noise variance

    def __post_init__(self):
        self.method = DesignMethod(self.method)
        if self.n_ini < 2:
            raise ValueError("n_ini must be >= 2")
        if self.n_seq < 0:
            raise ValueError("n_seq must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class CampaignHistory:
    """Everything one simulated campaign produced, in order."""

    config: DesignConfig
    problem: str
    observations: list[Observation] = field(default_factory=list)
    proposals: list[dict] = field(default_factory=list)
    metrics_per_step: list[dict] = field(default_factory=list)
    wallclock_per_step: list[float] = field(default_factory=list)
    terminated_early: bool = False
    termination_reason: Optional[str] = None


def _derive_seed(seed: int, *tags: int) -> int:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, *[t & 0xFFFFFFFF for t in tags]])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# space-filling designs
# ---------------------------------------------------------------------------


def _maxpro_score(design: np.ndarray) -> float:
    n = design.shape[0]
    total = 0.0
    for i in range(n - 1):
        diff = design[i + 1:] - design[i]
        sq = diff * diff
        if np.any(sq == 0.0):
            return math.inf
        total += float(np.sum(1.0 / np.prod(sq, axis=1)))
    return total


def _maxpro_point_score(design: np.ndarray, i: int, candidate_row: np.ndarray) -> float:
    diff = np.delete(design, i, axis=0) - candidate_row
    sq = diff * diff
    if np.any(np.all(sq == 0.0, axis=0)) and np.any(np.prod(sq, axis=1) == 0.0):
        return math.inf
    prod = np.prod(sq, axis=1)
    if np.any(prod == 0.0):
        return math.inf
    return float(np.sum(1.0 / prod))


def initial_design(n: int, p: int, seed: int = 0) -> np.ndarray:
    """Space-filling initial design with good projection properties.

    Draws 200 seeded Latin-hypercube candidates, keeps the one minimizing
    the inverse-product-distance criterion, then polishes it by coordinate
    exchange over a fixed interior grid.  All coordinates stay strictly
    inside (0, 1); deterministic for a given seed.
    """
    if n < 2:
        raise ValueError("initial designs need n >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 31]))
    sampler = qmc.LatinHypercube(d=p, seed=rng)
    best = None
    best_score = math.inf
    for _ in range(200):
        cand = sampler.random(n)
        score = _maxpro_score(cand)
        if score < best_score:
            best, best_score = cand, score
    design = np.array(best)

    grid = (np.arange(32) + 0.5) / 32.0
    for _ in range(2):  # two polish sweeps
        for i in range(n):
            for l in range(p):
                current = _maxpro_point_score(design, i, design[i])
                best_val = design[i, l]
                for g in grid:
                    row = design[i].copy()
                    row[l] = g
                    s = _maxpro_point_score(design, i, row)
                    if s < current:
                        current = s
                        best_val = g
                design[i, l] = best_val
    return np.clip(design, 1e-9, 1.0 - 1e-9)


def sobol_points(n: int, p: int, seed: Optional[int] = None) -> np.ndarray:
    """First n points of a Sobol' sequence; ``seed`` selects the scrambling
    (None gives the plain sequence)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p > 16:
        raise ValueError("sobol_points supports p <= 16")
    if seed is None:
        sampler = qmc.Sobol(d=p, scramble=False)
    else:
        sampler = qmc.Sobol(d=p, scramble=True, seed=seed)
    m = max(1, int(np.ceil(np.log2(n))))
    pts = sampler.random_base2(m)
    return pts[:n]


# ---------------------------------------------------------------------------
# benchmark test functions
# ---------------------------------------------------------------------------


def testfn_xi_1d(x):
    """Mean physical response of the 1-D benchmark."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.sin(10.0 * (x - 1.02) ** 2) - 1.25 * (x - 0.75) * (2.0 * x - 0.25) + 0.2


def testfn_f_1d(x):
    """Computer-model response of the 1-D benchmark."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.sin(10.0 * (x - 1.02) ** 2) + 0.1


def testfn_xi_2d(x1, x2):
    """Mean physical response of the 2-D benchmark (x2 = 0 uses the
    analytic limit of the exponential bracket)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    with np.errstate(divide="ignore"):
        bracket = np.where(x2 > 0.0, -np.expm1(-1.0 / (2.0 * np.where(x2 > 0.0, x2, 1.0))), 1.0)
    num = 2300.0 * x1**3 + 1900.0 * x1**2 + 2092.0 * x1 + 6.0
    den = 100.0 * x1**3 + 500.0 * x1**2 + 4.0 * x1 + 20.0
    return bracket * num / den


def testfn_f_2d(x1, x2):
    """Computer-model response of the 2-D benchmark: four-point average of
    shifted physical means, with the lower shift clamped at zero."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    lo = np.maximum(x2 - 0.05, 0.0)
    return 0.25 * (
        testfn_xi_2d(x1 + 0.05, x2 + 0.05)
        + testfn_xi_2d(x1 + 0.05, lo)
        + testfn_xi_2d(x1 - 0.05, x2 + 0.05)
        + testfn_xi_2d(x1 - 0.05, lo)
    )


@dataclass(frozen=True)
class Problem:
    """A simulated campaign target: physical mean, optional computer model."""

    name: str
    p: int
    xi: Callable[[np.ndarray], np.ndarray]
    f: Optional[Callable[[np.ndarray], np.ndarray]]
    sigma_eps: float
    c: float
    initial: str = "maxpro"  # or "equispaced" (1-D only)
    test_set: str = "grid1000"  # or "sobol200"

    @property
    def bifidelity(self) -> bool:
        return self.f is not None


def _xi_1d_vec(x: np.ndarray) -> np.ndarray:
    return testfn_xi_1d(x[:, 0])


def _f_1d_vec(x: np.ndarray) -> np.ndarray:
    return testfn_f_1d(x[:, 0])


def _xi_2d_vec(x: np.ndarray) -> np.ndarray:
    return testfn_xi_2d(x[:, 0], x[:, 1])


def _f_2d_vec(x: np.ndarray) -> np.ndarray:
    return testfn_f_2d(x[:, 0], x[:, 1])


PROBLEMS = {
    "1d-single": Problem("1d-single", 1, _xi_1d_vec, None, 0.1, 0.55,
                         initial="equispaced", test_set="grid1000"),
    "1d-bi": Problem("1d-bi", 1, _xi_1d_vec, _f_1d_vec, 0.1, 0.55,
                     initial="equispaced", test_set="grid1000"),
    "2d-bi": Problem("2d-bi", 2, _xi_2d_vec, _f_2d_vec, 1.0, 10.0,
                     initial="maxpro", test_set="sobol200"),
}


# ---------------------------------------------------------------------------
# criterion optimization
# ---------------------------------------------------------------------------


def reflect_to_unit(x: np.ndarray) -> np.ndarray:
    """Fold arbitrary coordinates into [0, 1] by reflection at the walls."""
    y = np.mod(np.asarray(x, dtype=float), 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def seq_maxpro_objective(existing: np.ndarray) -> Callable[[np.ndarray], float]:
    def objective(x: np.ndarray) -> float:
        diff = existing - x
        sq = diff * diff
        prod = np.prod(sq, axis=1)
        if np.any(prod == 0.0):
            return math.inf
        return float(np.sum(1.0 / prod))

    return objective


def _criterion_objective(model: FittedModel, method: DesignMethod,
                         config: DesignConfig, seed: int):
    if method is DesignMethod.SEQ_MAXPRO:
        obj = seq_maxpro_objective(model.X)

        def final(x):
            return CriterionEval(value=obj(x), lam=math.nan, trace_term=math.nan,
                                 constant_included=False)

        return obj, final

    if method is DesignMethod.IMSE_IMPUTE:
        def obj(x):
            return imse_baseline(model, x, variant="impute").value

        def final(x):
            return imse_baseline(model, x, variant="impute")

        return obj, final

    if method is DesignMethod.IMSE_CEN:
        def obj(x):
            return imse_baseline(model, x, variant="cen").value

        def final(x):
            return imse_baseline(model, x, variant="cen")

        return obj, final

    # ICMSE: the explicit no-censoring form when possible, the general
    # trace form otherwise (they agree when both apply)
    if model.n_cens == 0:
        def obj(x):
            return icmse_nocensor_training(model, x, config.c).value

        def final(x):
            return icmse_nocensor_training(model, x, config.c)

        return obj, final

    def obj(x):
        return icmse_general(model, x, seed=seed, include_constant=False).value

    def final(x):
        return icmse_general(model, x, seed=seed, include_constant=True)

    return obj, final


def propose_next(model: FittedModel, criterion: DesignMethod | str,
                 config: DesignConfig) -> tuple[np.ndarray, CriterionEval]:
    """Minimize the design criterion by multistart Nelder-Mead.

    Start points are seeded uniforms in the unit cube; every evaluation is
    folded back into the cube by coordinate reflection, so the returned
    point is always feasible.  Deterministic given ``config.seed``.
    """
    method = DesignMethod(criterion)
    seed = config.seed
    objective, final_eval = _criterion_objective(model, method, config, seed)

    def folded(x):
        v = objective(reflect_to_unit(x))
        return v if np.isfinite(v) else 1e300  # finite sentinel keeps NM quiet

    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 71]))
    starts = rng.uniform(0.0, 1.0, size=(config.restarts, config.p))
    best_x = None
    best_val = math.inf
    for s in starts:
        res = minimize(
            folded, s, method="Nelder-Mead",
            options={"maxiter": config.nm_max_iters, "xatol": 1e-4,
                     "fatol": np.inf, "adaptive": False},
        )
        if np.isfinite(res.fun) and res.fun < min(best_val, 1e299):
            best_val = float(res.fun)
            best_x = reflect_to_unit(res.x)
    if best_x is None:
        raise ProposalError(
            "no restart produced a finite criterion value",
            {"restarts": config.restarts, "method": method.value},
        )
    return np.asarray(best_x, dtype=float), final_eval(best_x)


# ---------------------------------------------------------------------------
# campaign simulation (Algorithm 1 with simulated experiments)
# ---------------------------------------------------------------------------


def _test_points(problem: Problem, seed: int) -> np.ndarray:
    if problem.test_set == "grid1000":
        return np.linspace(0.0, 1.0, 1000).reshape(-1, 1)
    return sobol_points(200, problem.p, seed=_derive_seed(seed, 97))


def _initial_points(problem: Problem, config: DesignConfig) -> np.ndarray:
    if problem.initial == "equispaced":
        if problem.p != 1:
            raise ValueError("equispaced initial designs are 1-D only")
        return np.linspace(0.0, 1.0, config.n_ini).reshape(-1, 1)
    return initial_design(config.n_ini, problem.p, seed=_derive_seed(config.seed, 11))


def _fit_eval_model(observations: Sequence[Observation], config: DesignConfig,
                    seed: int, warm: Optional[Hyperparams],
                    computer_params: Optional[Hyperparams] = None) -> FittedModel:
    cfg = OptConfig(restarts=config.fit_restarts, seed=seed, warm_start=warm,
                    fixed_noise=config.sigma2_eps, computer_params=computer_params)
    return fit_mle(list(observations), c=config.c, opt_config=cfg)


def impute_model(observations: Sequence[Observation], config: DesignConfig,
                  seed: int, computer_params: Optional[Hyperparams] = None) -> FittedModel:
    imputed = [
        replace(o, value=config.c, censored=False) if o.censored else o
        for o in observations
    ]
    # the imputed refit shares the campaign's computer block
    cfg = OptConfig(restarts=config.fit_restarts, seed=seed,
                    fixed_noise=config.sigma2_eps, computer_params=computer_params)
    mode = (
        ModelMode.CENSORED_BIFIDELITY
        if any(o.fidelity is Fidelity.COMPUTER for o in imputed)
        else ModelMode.STANDARD
    )
    return fit_mle(imputed, c=np.inf, mode=mode, opt_config=cfg)


def run_campaign_sim(problem: Problem | str, config: DesignConfig) -> CampaignHistory:
    """Run one simulated sequential-design campaign.

    Initial data come from the computer model (bi-fidelity) or noisy
    physical draws (single-fidelity); each sequential step refits, proposes
    the next input by the configured criterion, simulates the noisy
    response, and censors it at the limit.  Per-step RMSE and mean interval
    score are evaluated on a noiseless test set with the censored GP, for
    every method alike.
    """
    if isinstance(problem, str):
        problem = PROBLEMS[problem]
    # simulated experiments follow the adaptive algorithm as specified: the
    # measurement-noise level is part of each experiment's setup, not a
    # fitted quantity
    config = replace(config, p=problem.p, bifidelity=problem.bifidelity, c=problem.c,
                     sigma2_eps=problem.sigma_eps ** 2)
    history = CampaignHistory(config=config, problem=problem.name)
    noise_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed & 0xFFFFFFFF, 41]))
    test_x = _test_points(problem, config.seed)
    xi_true = problem.xi(test_x)

    x_init = _initial_points(problem, config)
    observations: list[Observation] = []
    if problem.bifidelity:
        f_vals = problem.f(x_init)
        observations += [
            Observation(x=x, value=float(v), fidelity=Fidelity.COMPUTER)
            for x, v in zip(x_init, f_vals)
        ]
    else:
        draws = problem.xi(x_init) + problem.sigma_eps * noise_rng.standard_normal(len(x_init))
        for x, y in zip(x_init, draws):
            cen = bool(y >= problem.c)
            observations.append(Observation(
                x=x, value=float(problem.c if cen else y), censored=cen))
    history.observations = observations

    def record_metrics(model: FittedModel, step: int, seconds: float):
        mean, var = model.predict(test_x)
        history.metrics_per_step.append({
            "step": step,
            "rmse": rmse(mean, xi_true),
            "mis": mean_interval_score(mean, np.sqrt(var), xi_true),
            "censored_count": sum(1 for o in history.observations if o.censored),
        })
        history.wallclock_per_step.append(seconds)

    t0 = time.perf_counter()
    warm: Optional[Hyperparams] = None
    try:
        model = _fit_eval_model(observations, config, _derive_seed(config.seed, 1, 0), None)
    except FitError as exc:
        history.terminated_early = True
        history.termination_reason = f"initial fit failed: {exc}"
        return history
    warm = model.params
    computer_params = model.params if problem.bifidelity else None
    record_metrics(model, 0, time.perf_counter() - t0)

    near_duplicates = 0
    for step in range(1, config.n_seq + 1):
        t_step = time.perf_counter()
        step_seed = _derive_seed(config.seed, 2, step)
        step_config = replace(config, seed=step_seed)
        try:
            if config.method is DesignMethod.IMSE_IMPUTE:
                propose_model = impute_model(observations, config, step_seed,
                                             computer_params=computer_params)
            else:
                propose_model = model
            x_star, ev = propose_next(propose_model, config.method, step_config)
        except (ProposalError, FitError) as exc:
            history.terminated_early = True
            history.termination_reason = f"proposal failed at step {step}: {exc}"
            break

        # mirror of the known IMSE-Cen instability: by ignoring censoring it
        # stacks runs inside censored regions until the covariance degenerates
        if config.method is DesignMethod.IMSE_CEN:
            if model.n and float(np.min(np.linalg.norm(model.X - x_star, axis=1))) < 1e-4:
                near_duplicates += 1
            else:
                near_duplicates = 0
            if near_duplicates >= 2:
                history.terminated_early = True
                history.termination_reason = (
                    f"two consecutive near-duplicate proposals at step {step}"
                )
                break

        history.proposals.append({
            "step": step,
            "x": x_star.tolist(),
            "value": ev.value,
            "lambda": ev.lam,
            "trace_term": ev.trace_term,
        })
        latent = float(problem.xi(x_star.reshape(1, -1))[0]
                       + problem.sigma_eps * noise_rng.standard_normal())
        censored = bool(latent >= problem.c)
        observations.append(Observation(
            x=x_star, value=float(problem.c if censored else latent), censored=censored))

        try:
            model = _fit_eval_model(observations, config,
                                    _derive_seed(config.seed, 1, step), warm,
                                    computer_params=computer_params)
            warm = model.params
        except FitError as exc:
            history.terminated_early = True
            history.termination_reason = f"refit failed at step {step}: {exc}"
            break
        record_metrics(model, step, time.perf_counter() - t_step)
    return history


def run_benchmark(problem: Problem | str, methods: Sequence[DesignMethod | str],
                  n_reps: int, config: DesignConfig,
                  progress: Optional[Callable[[str], None]] = None) -> list[dict]:
    """Replicated campaigns for several methods; one row per (method,
    replication, step) matching the benchmark CSV schema."""
    if isinstance(problem, str):
        problem = PROBLEMS[problem]
    rows: list[dict] = []
    for method in methods:
        method = DesignMethod(method)
        for rep in range(n_reps):
            rep_config = replace(
                config, method=method, seed=_derive_seed(config.seed, 3, rep))
            hist = run_campaign_sim(problem, rep_config)
            if progress is not None:
                progress(f"{problem.name} {method.value} rep {rep + 1}/{n_reps}: "
                         f"{len(hist.metrics_per_step) - 1} steps")
            for metrics, secs in zip(hist.metrics_per_step, hist.wallclock_per_step):
                rows.append({
                    "method": method.value,
                    "replication": rep,
                    "step": metrics["step"],
                    "rmse": metrics["rmse"],
                    "mis": metrics["mis"],
                    "censored_count": metrics["censored_count"],
                    "seconds": secs,
                })
    return rows
