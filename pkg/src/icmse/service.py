"""Human-in-the-loop campaign service.

A campaign is persisted as an append-only JSON-lines event log (one file
per campaign) plus a snapshot document rewritten after each refit; the
event log is the source of truth and replaying it reconstructs the
campaign document exactly.  Numbers are serialized with ``repr`` (17
significant digits), so every persisted value round-trips bit-for-bit.

Operations on one campaign are serialized by an exclusive per-campaign
lock; distinct campaigns proceed in parallel.  Refits run synchronously up
to 200 observations and on a background thread beyond that.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import asdict
from dataclasses import replace as dataclasses_replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .criteria import icmse_general, icmse_nocensor_training, imse_baseline
from .designer import (
    DesignConfig,
    DesignMethod,
    impute_model,
    initial_design,
    propose_next,
    seq_maxpro_objective,
)
from .errors import FitError, IcmseError, ProposalError
from .gpmodel import (
    Fidelity,
    FittedModel,
    Hyperparams,
    ModelMode,
    Observation,
    OptConfig,
    fit_mle,
)
from .kernels import LengthscaleParams

__all__ = ["ApiError", "CampaignStore", "create_app", "DEFAULT_STORE_ENV"]

DEFAULT_STORE_ENV = "ICMSE_STORE"
SYNC_REFIT_LIMIT = 200
HIGH_CENSORING_RISK = 0.999


class ApiError(IcmseError):
    """Service-level error carrying the wire format {code, message, field?}."""

    def __init__(self, status: int, code: str, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.field = field

    def body(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.field is not None:
            out["field"] = self.field
        return out


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _finite_or_none(v: float) -> Optional[float]:
    return None if v is None or math.isinf(v) else float(v)


def _config_to_doc(config: DesignConfig) -> dict:
    doc = asdict(config)
    doc["method"] = config.method.value
    doc["c"] = _finite_or_none(config.c)
    return doc


def _config_from_doc(doc: dict) -> DesignConfig:
    doc = dict(doc)
    c = doc.get("c", None)
    doc["c"] = math.inf if c is None else float(c)
    known = {f for f in DesignConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ApiError(422, "validation", f"unknown config fields {sorted(unknown)}",
                       field=sorted(unknown)[0])
    try:
        return DesignConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ApiError(422, "validation", f"invalid campaign config: {exc}") from exc


def _obs_to_doc(obs: Observation) -> dict:
    return {
        "x": [float(v) for v in obs.x],
        "value": float(obs.value),
        "censored": bool(obs.censored),
        "fidelity": obs.fidelity.value,
    }


def _obs_from_doc(doc: dict) -> Observation:
    return Observation(
        x=np.array(doc["x"], dtype=float),
        value=float(doc["value"]),
        censored=bool(doc["censored"]),
        fidelity=Fidelity(doc["fidelity"]),
    )


def _params_to_doc(params: Hyperparams) -> dict:
    return {
        "mu": params.mu,
        "sigma2": params.sigma2,
        "theta": [float(t) for t in params.theta.theta],
        "sigma2_eps": params.sigma2_eps,
        "sigma2_delta": params.sigma2_delta,
        "theta_delta": (
            [float(t) for t in params.theta_delta.theta]
            if params.theta_delta is not None
            else None
        ),
    }


def _params_from_doc(doc: dict) -> Hyperparams:
    return Hyperparams(
        mu=float(doc["mu"]),
        sigma2=float(doc["sigma2"]),
        theta=LengthscaleParams(np.array(doc["theta"], dtype=float)),
        sigma2_eps=float(doc["sigma2_eps"]),
        sigma2_delta=float(doc.get("sigma2_delta", 0.0)),
        theta_delta=(
            LengthscaleParams(np.array(doc["theta_delta"], dtype=float))
            if doc.get("theta_delta") is not None
            else None
        ),
    )


# ---------------------------------------------------------------------------
# event-sourced campaign state
# ---------------------------------------------------------------------------


def _new_doc(campaign_id: str) -> dict:
    return {
        "id": campaign_id,
        "config": None,
        "status": "AwaitingObservation",
        "created_at": None,
        "initial_design": [],
        "observations": [],
        "proposals": [],
        "pending_proposal": None,
        "model_snapshot": None,
        "last_error": None,
        "event_seq": 0,
        "seq_tokens": [],
    }


def _apply_event(doc: dict, event: dict) -> None:
    kind = event["kind"]
    payload = event["payload"]
    doc["event_seq"] = event["seq"]
    if kind == "Created":
        doc["config"] = payload["config"]
        doc["created_at"] = event["timestamp"]
        doc["initial_design"] = payload.get("initial_design", [])
    elif kind == "ObservationAdded":
        doc["observations"].append(payload["observation"])
        if payload.get("seq_token") is not None:
            doc["seq_tokens"].append(payload["seq_token"])
        if doc["pending_proposal"] is not None and payload.get("attributed", False):
            doc["pending_proposal"] = None
    elif kind == "ProposalIssued":
        doc["proposals"].append(payload)
        doc["pending_proposal"] = payload
    elif kind == "ModelRefit":
        doc["model_snapshot"] = {
            "params": payload["params"],
            "mode": payload["mode"],
            "seed": payload["seed"],
        }
        doc["last_error"] = None
    elif kind == "Error":
        doc["last_error"] = payload
    else:  # pragma: no cover - log corruption
        raise ValueError(f"unknown event kind {kind!r}")
    doc["status"] = _derive_status(doc)


def _derive_status(doc: dict) -> str:
    if doc["pending_proposal"] is not None:
        return "AwaitingObservation"
    if doc["last_error"] is not None:
        return "Failed"
    if doc["model_snapshot"] is not None:
        return "ReadyToPropose"
    return "AwaitingObservation"


class _CampaignState:
    def __init__(self, doc: dict):
        self.doc = doc
        self.lock = threading.RLock()
        self.model: Optional[FittedModel] = None


class CampaignStore:
    """Persistent registry of campaigns, event-sourced on disk."""

    def __init__(self, directory: Optional[str] = None):
        directory = directory or os.environ.get(DEFAULT_STORE_ENV, "./campaigns")
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._campaigns: dict[str, _CampaignState] = {}
        self._registry_lock = threading.Lock()

    # -- persistence --------------------------------------------------------

    def _events_path(self, campaign_id: str) -> Path:
        return self.dir / f"{campaign_id}.events.jsonl"

    def _snapshot_path(self, campaign_id: str) -> Path:
        return self.dir / f"{campaign_id}.snapshot.json"

    def _append_event(self, state: _CampaignState, kind: str, payload: dict) -> dict:
        event = {
            "seq": state.doc["event_seq"] + 1,
            "timestamp": _utcnow(),
            "kind": kind,
            "payload": payload,
        }
        with open(self._events_path(state.doc["id"]), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
        _apply_event(state.doc, event)
        return event

    def _write_snapshot(self, state: _CampaignState) -> None:
        with open(self._snapshot_path(state.doc["id"]), "w", encoding="utf-8") as fh:
            json.dump(state.doc, fh)

    def replay(self, campaign_id: str) -> dict:
        """Fold the event log into a fresh campaign document."""
        path = self._events_path(campaign_id)
        if not path.exists():
            raise ApiError(404, "not_found", f"campaign {campaign_id} not found")
        doc = _new_doc(campaign_id)
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    _apply_event(doc, json.loads(line))
        return doc

    def _state(self, campaign_id: str) -> _CampaignState:
        with self._registry_lock:
            if campaign_id not in self._campaigns:
                doc = self.replay(campaign_id)
                self._campaigns[campaign_id] = _CampaignState(doc)
            return self._campaigns[campaign_id]

    def list_ids(self) -> list[str]:
        return sorted(p.name.removesuffix(".events.jsonl")
                      for p in self.dir.glob("*.events.jsonl"))

    # -- model handling -------------------------------------------------------

    @staticmethod
    def _observations(doc: dict) -> list[Observation]:
        return [_obs_from_doc(o) for o in doc["observations"]]

    @staticmethod
    def _can_fit(doc: dict) -> bool:
        obs = doc["observations"]
        uncensored = sum(1 for o in obs if not o["censored"])
        if uncensored < 2:
            return False
        config = doc["config"]
        if config.get("bifidelity"):
            return any(o["fidelity"] == "computer" for o in obs)
        return True

    def _rebuild_model(self, state: _CampaignState) -> Optional[FittedModel]:
        snap = state.doc["model_snapshot"]
        if snap is None:
            return None
        config = _config_from_doc(state.doc["config"])
        return FittedModel(
            _params_from_doc(snap["params"]),
            self._observations(state.doc),
            censor_limit=config.c,
            mode=ModelMode(snap["mode"]),
            seed=int(snap["seed"]),
        )

    def model_for(self, campaign_id: str) -> Optional[FittedModel]:
        state = self._state(campaign_id)
        with state.lock:
            if state.model is None:
                state.model = self._rebuild_model(state)
            return state.model

    def _refit(self, state: _CampaignState) -> None:
        doc = state.doc
        config = _config_from_doc(doc["config"])
        observations = self._observations(doc)
        seed = int(np.random.SeedSequence(
            [config.seed & 0xFFFFFFFF, len(observations)]).generate_state(1)[0])
        warm = None
        if doc["model_snapshot"] is not None:
            warm = _params_from_doc(doc["model_snapshot"]["params"])
        try:
            model = fit_mle(
                observations, c=config.c,
                opt_config=OptConfig(restarts=config.fit_restarts, seed=seed,
                                     warm_start=warm,
                                     fixed_noise=config.sigma2_eps),
            )
        except (FitError, IcmseError, ValueError) as exc:
            self._append_event(state, "Error", {"stage": "refit", "message": str(exc)})
            return
        state.model = model
        self._append_event(state, "ModelRefit", {
            "params": _params_to_doc(model.params),
            "mode": model.mode.value,
            "seed": seed,
            "n_observations": len(observations),
        })
        self._write_snapshot(state)

    # -- operations -----------------------------------------------------------

    def create_campaign(self, config_doc: dict,
                        initial_observations: Optional[Sequence[dict]] = None) -> dict:
        config = _config_from_doc(config_doc)
        campaign_id = uuid.uuid4().hex
        state = _CampaignState(_new_doc(campaign_id))
        with self._registry_lock:
            self._campaigns[campaign_id] = state
        with state.lock:
            payload: dict[str, Any] = {"config": _config_to_doc(config)}
            if not initial_observations:
                design = initial_design(config.n_ini, config.p, seed=config.seed)
                payload["initial_design"] = [[float(v) for v in row] for row in design]
            self._append_event(state, "Created", payload)
            for raw in initial_observations or []:
                obs = self._validate_observation(state.doc, raw)
                self._append_event(state, "ObservationAdded", {
                    "observation": _obs_to_doc(obs),
                    "normalized": bool(raw.get("censored"))
                    and raw.get("value") is not None
                    and float(raw["value"]) != config.c,
                    "attributed": False,
                    "seq_token": None,
                })
            if self._can_fit(state.doc):
                self._refit(state)
            return dict(state.doc)

    def _validate_observation(self, doc: dict, raw: dict) -> Observation:
        config = _config_from_doc(doc["config"])
        x = raw.get("x")
        if x is None or len(x) != config.p:
            raise ApiError(422, "validation",
                           f"x must have {config.p} coordinates", field="x")
        xv = np.asarray(x, dtype=float)
        if np.any(xv < 0.0) or np.any(xv > 1.0):
            raise ApiError(422, "validation", "x must lie in [0,1]^p", field="x")
        censored = bool(raw.get("censored", False))
        fidelity = Fidelity(raw.get("fidelity", "physical"))
        value = raw.get("value")
        if censored:
            if not math.isfinite(config.c):
                raise ApiError(422, "validation",
                               "censored observations need a finite censoring limit",
                               field="censored")
            value = config.c
        else:
            if value is None:
                raise ApiError(422, "validation", "value required", field="value")
            value = float(value)
            if math.isfinite(config.c) and value > config.c and fidelity is Fidelity.PHYSICAL:
                raise ApiError(
                    422, "validation",
                    f"uncensored physical value {value} exceeds the censoring limit "
                    f"{config.c}; submit it as censored instead",
                    field="value",
                )
        try:
            return Observation(x=xv, value=float(value), censored=censored,
                               fidelity=fidelity)
        except ValueError as exc:
            raise ApiError(422, "validation", str(exc)) from exc

    def get_campaign(self, campaign_id: str) -> dict:
        state = self._state(campaign_id)
        with state.lock:
            return dict(state.doc)

    def submit_observation(self, campaign_id: str, raw: dict) -> dict:
        state = self._state(campaign_id)
        with state.lock:
            doc = state.doc
            token = raw.get("seq_token")
            if token is not None and token in doc["seq_tokens"]:
                raise ApiError(409, "conflict", f"seq_token {token!r} already used",
                               field="seq_token")
            obs = self._validate_observation(doc, raw)
            normalized = bool(raw.get("censored")) and raw.get("value") is not None \
                and float(raw["value"]) != obs.value
            pending = doc["pending_proposal"]
            attributed = bool(
                pending is not None
                and np.allclose(np.asarray(pending["x"], dtype=float), obs.x, atol=1e-9)
            )
            self._append_event(state, "ObservationAdded", {
                "observation": _obs_to_doc(obs),
                "normalized": normalized,
                "attributed": attributed,
                "seq_token": token,
            })
            state.model = None
            if self._can_fit(doc):
                if len(doc["observations"]) <= SYNC_REFIT_LIMIT:
                    self._refit(state)
                else:
                    threading.Thread(
                        target=self._background_refit, args=(campaign_id,), daemon=True
                    ).start()
            out = dict(doc)
            out["normalized"] = normalized
            return out

    def _background_refit(self, campaign_id: str) -> None:
        state = self._state(campaign_id)
        with state.lock:
            self._refit(state)

    def get_proposal(self, campaign_id: str) -> dict:
        state = self._state(campaign_id)
        with state.lock:
            doc = state.doc
            if doc["pending_proposal"] is not None:
                return dict(doc["pending_proposal"])
            if doc["status"] != "ReadyToPropose":
                raise ApiError(409, "conflict",
                               f"campaign is {doc['status']}, not ReadyToPropose")
            model = state.model or self._rebuild_model(state)
            state.model = model
            config = _config_from_doc(doc["config"])
            seed = int(np.random.SeedSequence(
                [config.seed & 0xFFFFFFFF, 5, len(doc["proposals"])]).generate_state(1)[0])
            propose_model = model
            if config.method is DesignMethod.IMSE_IMPUTE and model.n_cens > 0:
                propose_model = self._imputed_model(state, config, seed)
            try:
                x_star, ev = propose_next(propose_model, config.method,
                                          dataclasses_replace(config, seed=seed))
            except ProposalError as exc:
                self._append_event(state, "Error",
                                   {"stage": "proposal", "message": str(exc)})
                raise ApiError(500, "numerical", f"proposal failed: {exc}") from exc
            lam = None if not np.isfinite(ev.lam) else float(ev.lam)
            payload = {
                "x_next": [float(v) for v in x_star],
                "diagnostics": {
                    "value": float(ev.value),
                    "lambda": lam,
                    "trace_term": None if not np.isfinite(ev.trace_term) else float(ev.trace_term),
                    "constant_included": ev.constant_included,
                    "high_censoring_risk": bool(lam is not None and lam > HIGH_CENSORING_RISK),
                },
                "x": [float(v) for v in x_star],
            }
            self._append_event(state, "ProposalIssued", payload)
            return dict(payload)

    def _lambda_point(self, model: FittedModel, mean: np.ndarray, var: np.ndarray,
                      c: float) -> np.ndarray:
        if not math.isfinite(c):
            return np.zeros_like(mean)
        from scipy.special import ndtr

        total = np.sqrt(var + model.params.sigma2_eps)
        return np.asarray(ndtr((mean - c) / np.maximum(total, 1e-300)), dtype=float)

    def get_predictions(self, campaign_id: str, grid: list[list[float]]) -> list[dict]:
        state = self._state(campaign_id)
        with state.lock:
            doc = state.doc
            model = state.model or self._rebuild_model(state)
            state.model = model
            if model is None:
                raise ApiError(409, "conflict", "no fitted model yet")
            config = _config_from_doc(doc["config"])
            pts = self._validate_grid(grid, config.p)
            mean, var = model.predict(pts)
            lam = self._lambda_point(model, mean, var, config.c)
            return [
                {"mean": float(m), "var": float(v), "lambda_point": float(lp)}
                for m, v, lp in zip(mean, var, lam)
            ]

    def _imputed_model(self, state: _CampaignState, config: DesignConfig,
                       seed: int) -> FittedModel:
        key = ("impute", len(state.doc["observations"]))
        cached = getattr(state, "impute_cache", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        model = impute_model(self._observations(state.doc), config, seed)
        state.impute_cache = (key, model)
        return model

    def get_criterion(self, campaign_id: str, grid: list[list[float]]) -> list[dict]:
        state = self._state(campaign_id)
        with state.lock:
            doc = state.doc
            model = state.model or self._rebuild_model(state)
            state.model = model
            if model is None:
                raise ApiError(409, "conflict", "no fitted model yet")
            config = _config_from_doc(doc["config"])
            pts = self._validate_grid(grid, config.p)
            seed = int(np.random.SeedSequence(
                [config.seed & 0xFFFFFFFF, 6, len(doc["observations"])]).generate_state(1)[0])
            out = []
            maxpro = seq_maxpro_objective(model.X) if config.method is DesignMethod.SEQ_MAXPRO else None
            impute = (
                self._imputed_model(state, config, seed)
                if config.method is DesignMethod.IMSE_IMPUTE and model.n_cens > 0
                else model
            )
            for x in pts:
                lam_val: Optional[float] = None
                if config.method is DesignMethod.SEQ_MAXPRO:
                    value = maxpro(x)
                elif config.method is DesignMethod.IMSE_IMPUTE:
                    ev = imse_baseline(impute, x, variant="impute")
                    value, lam_val = ev.value, ev.lam
                elif config.method is DesignMethod.IMSE_CEN:
                    ev = imse_baseline(model, x, variant="cen")
                    value, lam_val = ev.value, ev.lam
                elif model.n_cens == 0:
                    ev = icmse_nocensor_training(model, x, config.c)
                    value, lam_val = ev.value, ev.lam
                else:
                    ev = icmse_general(model, x, seed=seed, include_constant=True)
                    value, lam_val = ev.value, ev.lam
                out.append({
                    "value": float(value),
                    "lambda": None if lam_val is None or not np.isfinite(lam_val) else float(lam_val),
                })
            return out

    @staticmethod
    def _validate_grid(grid: list[list[float]], p: int) -> np.ndarray:
        if not grid:
            raise ApiError(422, "validation", "grid must contain at least one point",
                           field="grid")
        pts = []
        for i, point in enumerate(grid):
            if len(point) != p:
                raise ApiError(422, "validation",
                               f"grid point {i} has {len(point)} coordinates, expected {p}",
                               field=f"grid[{i}]")
            arr = np.asarray(point, dtype=float)
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise ApiError(422, "validation",
                               f"grid point {i} lies outside [0,1]^p", field=f"grid[{i}]")
            pts.append(arr)
        return np.vstack(pts)


# ---------------------------------------------------------------------------
# FastAPI wiring
# ---------------------------------------------------------------------------


def _parse_grid_param(grid: str) -> list[list[float]]:
    try:
        return [[float(v) for v in chunk.split(",")] for chunk in grid.split(";") if chunk]
    except ValueError as exc:
        raise ApiError(422, "validation", f"malformed grid parameter: {exc}",
                       field="grid") from exc


def create_app(store: Optional[CampaignStore] = None):
    """Build the HTTP/JSON application around a campaign store."""
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="censored-design campaign service")
    app.state.store = store or CampaignStore()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(loc) for loc in first.get("loc", []) if loc != "body")
        return JSONResponse(
            status_code=422,
            content={"code": "validation", "message": first.get("msg", "invalid request"),
                     "field": field or None},
        )

    @app.post("/api/campaigns")
    def create_campaign(body: dict):
        config = body.get("config")
        if config is None:
            raise ApiError(422, "validation", "config required", field="config")
        doc = app.state.store.create_campaign(config, body.get("initial_observations"))
        return JSONResponse(status_code=201, content=doc)

    @app.get("/api/campaigns/{campaign_id}")
    def get_campaign(campaign_id: str):
        return app.state.store.get_campaign(campaign_id)

    @app.post("/api/campaigns/{campaign_id}/observations")
    def submit_observation(campaign_id: str, body: dict):
        return app.state.store.submit_observation(campaign_id, body)

    @app.get("/api/campaigns/{campaign_id}/proposal")
    def get_proposal(campaign_id: str):
        return app.state.store.get_proposal(campaign_id)

    @app.get("/api/campaigns/{campaign_id}/predictions")
    def get_predictions(campaign_id: str, grid: str):
        return app.state.store.get_predictions(campaign_id, _parse_grid_param(grid))

    @app.get("/api/campaigns/{campaign_id}/criterion")
    def get_criterion(campaign_id: str, grid: str):
        return app.state.store.get_criterion(campaign_id, _parse_grid_param(grid))

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    # serve the browser console when its build output is present
    frontend = Path(__file__).resolve().parents[2] / "frontend"
    if (frontend / "dist" / "main.js").exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="console")

    return app
