"""Command-line entry points: benchmark simulation, fitting, proposing,
and serving the campaign HTTP service.

Exit codes: 0 success, 2 validation/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from .designer import (
    PROBLEMS,
    DesignConfig,
    DesignMethod,
    propose_next,
    run_benchmark,
)
from .errors import FitError, IcmseError, NumericalError, ProposalError
from .gpmodel import (
    Fidelity,
    FittedModel,
    Hyperparams,
    ModelMode,
    OptConfig,
    fit_mle,
    read_observations_csv,
)
from .kernels import LengthscaleParams

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_METHOD_ALIASES = {
    "icmse": DesignMethod.ICMSE,
    "imse-impute": DesignMethod.IMSE_IMPUTE,
    "imse_impute": DesignMethod.IMSE_IMPUTE,
    "imse-cen": DesignMethod.IMSE_CEN,
    "imse_cen": DesignMethod.IMSE_CEN,
    "seq-maxpro": DesignMethod.SEQ_MAXPRO,
    "seq_maxpro": DesignMethod.SEQ_MAXPRO,
    "maxpro": DesignMethod.SEQ_MAXPRO,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icmse",
        description="Adaptive experimental design under response censoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicated benchmark campaigns to CSV")
    sim.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    sim.add_argument("--method", action="append", required=True,
                     help="design method (repeatable): icmse, imse-impute, imse-cen, seq-maxpro")
    sim.add_argument("--n-ini", type=int, required=True)
    sim.add_argument("--n-seq", type=int, required=True)
    sim.add_argument("--reps", type=int, default=20)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--restarts", type=int, default=10)
    sim.add_argument("--fit-restarts", type=int, default=6)
    sim.add_argument("--timing", choices=["none", "wall"], default="none",
                     help="'wall' records wall-clock seconds; 'none' (default) writes "
                          "0.0 so equal seeds give byte-identical CSVs")
    sim.add_argument("--out", required=True)
    sim.add_argument("--quiet", action="store_true")

    fit = sub.add_parser("fit", help="fit a (censored) GP model from an observation CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--censor-limit", type=float, default=math.inf)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--restarts", type=int, default=10)
    fit.add_argument("--out", required=True)

    prop = sub.add_parser("propose", help="propose the next run from a fitted model JSON")
    prop.add_argument("--model", required=True)
    prop.add_argument("--method", default="icmse")
    prop.add_argument("--restarts", type=int, default=10)
    prop.add_argument("--seed", type=int, default=0)

    serve = sub.add_parser("serve", help="serve the campaign HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.add_argument("--store", default=None,
                       help="campaign directory (default: $ICMSE_STORE or ./campaigns)")
    return parser


def _fmt(value: float) -> str:
    return repr(float(value))


def _cmd_simulate(args) -> int:
    problem = PROBLEMS[args.problem]
    try:
        methods = [_METHOD_ALIASES[m.lower()] for m in args.method]
    except KeyError as exc:
        print(f"unknown method {exc.args[0]!r}", file=sys.stderr)
        return EXIT_VALIDATION
    config = DesignConfig(
        p=problem.p, n_ini=args.n_ini, n_seq=args.n_seq, c=problem.c,
        bifidelity=problem.bifidelity, restarts=args.restarts, seed=args.seed,
        fit_restarts=args.fit_restarts,
    )
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    rows = run_benchmark(problem, methods, args.reps, config, progress=progress)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("method,replication,step,rmse,mis,censored_count,seconds\n")
        for r in rows:
            seconds = r["seconds"] if args.timing == "wall" else 0.0
            fh.write(
                f"{r['method']},{r['replication']},{r['step']},"
                f"{_fmt(r['rmse'])},{_fmt(r['mis'])},{r['censored_count']},"
                f"{_fmt(seconds)}\n"
            )
    return EXIT_OK


def _model_to_json(model: FittedModel) -> dict:
    par = model.params
    return {
        "mode": model.mode.value,
        "censor_limit": None if math.isinf(model.censor_limit) else model.censor_limit,
        "seed": model.seed,
        "params": {
            "mu": par.mu,
            "sigma2": par.sigma2,
            "theta": [float(t) for t in par.theta.theta],
            "sigma2_eps": par.sigma2_eps,
            "sigma2_delta": par.sigma2_delta,
            "theta_delta": (
                [float(t) for t in par.theta_delta.theta]
                if par.theta_delta is not None else None
            ),
        },
        "observations": [
            {
                "x": [float(v) for v in o.x],
                "value": float(o.value),
                "censored": bool(o.censored),
                "fidelity": o.fidelity.value,
            }
            for o in model.data
        ],
    }


def _model_from_json(doc: dict) -> FittedModel:
    from .gpmodel import Observation

    par = doc["params"]
    params = Hyperparams(
        mu=float(par["mu"]),
        sigma2=float(par["sigma2"]),
        theta=LengthscaleParams(np.array(par["theta"], dtype=float)),
        sigma2_eps=float(par["sigma2_eps"]),
        sigma2_delta=float(par.get("sigma2_delta", 0.0)),
        theta_delta=(
            LengthscaleParams(np.array(par["theta_delta"], dtype=float))
            if par.get("theta_delta") is not None else None
        ),
    )
    observations = [
        Observation(
            x=np.array(o["x"], dtype=float), value=float(o["value"]),
            censored=bool(o["censored"]), fidelity=Fidelity(o["fidelity"]),
        )
        for o in doc["observations"]
    ]
    c = doc.get("censor_limit")
    return FittedModel(
        params, observations, censor_limit=math.inf if c is None else float(c),
        mode=ModelMode(doc["mode"]), seed=int(doc.get("seed", 0)),
    )


def _cmd_fit(args) -> int:
    observations = read_observations_csv(args.data)
    model = fit_mle(
        observations, c=args.censor_limit,
        opt_config=OptConfig(restarts=args.restarts, seed=args.seed),
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(_model_to_json(model), fh, indent=2)
        fh.write("\n")
    print(f"fitted {model.mode.value} model on {model.n} observations "
          f"({model.n_cens} censored) -> {args.out}")
    return EXIT_OK


def _cmd_propose(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        model = _model_from_json(json.load(fh))
    method = _METHOD_ALIASES.get(args.method.lower())
    if method is None:
        print(f"unknown method {args.method!r}", file=sys.stderr)
        return EXIT_VALIDATION
    config = DesignConfig(
        p=model.p, n_ini=max(model.n, 2), n_seq=1, c=model.censor_limit,
        bifidelity=model.mode is ModelMode.CENSORED_BIFIDELITY,
        method=method, restarts=args.restarts, seed=args.seed,
    )
    x_star, ev = propose_next(model, method, config)
    print(json.dumps({
        "x_next": [float(v) for v in x_star],
        "value": float(ev.value),
        "lambda": None if not np.isfinite(ev.lam) else float(ev.lam),
    }))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import CampaignStore, create_app

    app = create_app(CampaignStore(args.store))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "propose":
            return _cmd_propose(args)
        if args.command == "serve":
            return _cmd_serve(args)
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FitError, ProposalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IcmseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
