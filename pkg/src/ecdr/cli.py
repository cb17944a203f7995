"""Command line front end: estimation on CSV data and the simulation harness.

Every number emitted here is produced by a library call that tests can reach
without the CLI; this module only parses flags, wires the calls together, and
serializes results (JSON by default, CSV on request).  Exit codes: 0 success,
2 configuration error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import dataset as ds
from . import simulation as sim
from .estimators import EstimatorError, infer
from .solver import SolverError, fit_nuisances

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class ConfigError(Exception):
    pass


def _parse_lambda(text: str):
    if text == "cv":
        return "cv"
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(
            "--lambda must be 'cv' or four colon-separated values "
            "gamma:beta:alpha_eff:alpha_nv"
        )
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--lambda: {exc}") from None
    if any(v < 0 for v in vals):
        raise ConfigError("--lambda values must be nonnegative")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecdr",
        description="Treatment-effect estimation with external controls",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate the effect from a CSV file")
    est.add_argument("--data", required=True, help="input CSV path")
    est.add_argument("--outcome", required=True, help="outcome column name")
    est.add_argument("--treatment", required=True, help="treatment indicator column")
    est.add_argument("--source", required=True,
                     help="source indicator column (1=primary, 0=external)")
    est.add_argument("--covariates", required=True,
                     help="comma-separated covariate column names")
    est.add_argument("--missing-policy", default="fail", choices=["fail", "drop-row"])
    est.add_argument("--level", type=float, default=0.95)
    est.add_argument("--lambda", dest="lam", default="cv",
                     help="'cv' or gamma:beta:alpha_eff:alpha_nv")
    est.add_argument("--cv-folds", type=int, default=5)
    est.add_argument("--cv-rule", default=None, choices=["min", "1se"],
                     help="CV selection rule for all four fits "
                          "(default: 1se for the pooled calibration, min otherwise)")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--clip-a", action="store_true",
                     help="clip the combination weight to [0,1] (off-spec variance)")
    est.add_argument("--out", default=None, help="output path (default: stdout)")
    est.add_argument("--format", default="json", choices=["json", "csv"])

    simp = sub.add_parser("simulate", help="run a replicated simulation study")
    simp.add_argument("--model", default=None, choices=["1", "2i", "2ii", "2iii"])
    simp.add_argument("--paper-table", type=int, default=None, choices=[2, 3, 4, 5],
                      help="preset grid reproducing one benchmark table")
    simp.add_argument("--d", type=int, default=None, help="covariate dimension")
    simp.add_argument("--N", default=None, help="total size(s), model 1 (comma list)")
    simp.add_argument("--n", default=None, help="primary size(s), model 2 (comma list)")
    simp.add_argument("--m", type=int, default=1000,
                      help="external-control block size, model 2 cases i/ii")
    simp.add_argument("--pi-ratio", type=float, default=1 / 3,
                      help="primary share n/N, model 2 case iii")
    simp.add_argument("--reps", type=int, required=True)
    simp.add_argument("--seed", type=int, default=None)
    simp.add_argument("--jobs", type=int, default=1)
    simp.add_argument("--lambda", dest="lam", default="cv")
    simp.add_argument("--cv-folds", type=int, default=5)
    simp.add_argument("--cv-rule", default=None, choices=["min", "1se"])
    simp.add_argument("--level", type=float, default=0.95)
    simp.add_argument("--oracle-draws", type=int, default=2_000_000)
    simp.add_argument("--out", default=None)
    simp.add_argument("--format", default="json", choices=["json", "csv"])
    return parser


def _write(text: str, out_path):
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _estimate_csv(payload: dict) -> str:
    buf = io.StringIO()
    rows = [payload["reports"][m] for m in ("nv", "eff", "safe")]
    cols = ["method", "theta", "std_error", "ci_lower", "ci_upper", "level",
            "a_hat", "are_vs_nv"]
    writer = csv.DictWriter(buf, fieldnames=cols)
    writer.writeheader()
    for rep in rows:
        writer.writerow({
            "method": rep["method"], "theta": rep["theta"],
            "std_error": rep["std_error"], "ci_lower": rep["ci"][0],
            "ci_upper": rep["ci"][1], "level": rep["level"],
            "a_hat": "" if rep["a_hat"] is None else rep["a_hat"],
            "are_vs_nv": rep["are_vs_nv"],
        })
    return buf.getvalue()


def run_estimate(args) -> str:
    lam = _parse_lambda(args.lam)
    if not 0.0 < args.level < 1.0:
        raise ConfigError("--level must be in (0, 1)")
    if args.cv_folds < 2:
        raise ConfigError("--cv-folds must be at least 2")
    schema = ds.ColumnSchema(
        outcome_column=args.outcome,
        treatment_column=args.treatment,
        source_column=args.source,
        covariate_columns=[c.strip() for c in args.covariates.split(",") if c.strip()],
        missing_policy=args.missing_policy,
    )
    data = ds.load_csv(args.data, schema)
    fits = fit_nuisances(data, lambdas=lam, cv_folds=args.cv_folds, seed=args.seed,
                         cv_rule=args.cv_rule)
    reports = infer(data, fits, level=args.level, clip_a=args.clip_a)

    config = {
        "command": "estimate", "data": args.data, "outcome": args.outcome,
        "treatment": args.treatment, "source": args.source,
        "covariates": schema.covariate_columns,
        "missing_policy": args.missing_policy, "level": args.level,
        "lambda": "cv" if lam == "cv" else list(lam),
        "cv_folds": args.cv_folds,
        "cv_rule": args.cv_rule or "default",
        "seed": args.seed, "clip_a": args.clip_a,
        "format": args.format,
    }
    warnings = []
    if data.n_external == 0:
        warnings.append("no external-control rows: pooled and primary-only "
                        "estimators coincide")
    payload = {
        "config": config,
        "data_summary": data.summary(),
        "warnings": warnings,
        "nuisance": {name: fit.to_json_dict() for name, fit in fits},
        "lambdas": fits.lambdas,
        "reports": {m: rep.to_json_dict() for m, rep in reports.items()},
    }
    if args.format == "csv":
        return _estimate_csv(payload)
    return json.dumps(payload, indent=2, sort_keys=True)


def run_simulate(args) -> str:
    if args.seed is None:
        raise ConfigError("simulate requires --seed (no silent nondeterminism)")
    lam = _parse_lambda(args.lam)
    if args.paper_table is None and args.model is None:
        raise ConfigError("simulate needs either --paper-table or --model")

    if args.paper_table is not None:
        grid = sim.table_preset(args.paper_table)
    else:
        if args.d is None:
            raise ConfigError("--d is required with --model")
        if args.model == "1":
            if args.N is None:
                raise ConfigError("model 1 requires --N")
            spec = sim.ModelSpec.model1(args.d)
            sizes = _int_list(args.N)
        else:
            if args.n is None:
                raise ConfigError("model 2 requires --n")
            case = args.model[1:]
            spec = sim.ModelSpec.model2(case, args.d, external_m=args.m)
            if case == "iii":
                ratio = (1.0 - args.pi_ratio) / args.pi_ratio
                spec = sim.ModelSpec(model=spec.model, d=spec.d, sizing="ratio",
                                     external_ratio=ratio)
            sizes = _int_list(args.n)
        grid = [(spec, sizes)]

    tables = [
        sim.run_study(spec, sizes, reps=args.reps, lambda_policy=lam,
                      seed=args.seed, jobs=args.jobs, cv_folds=args.cv_folds,
                      cv_rule=args.cv_rule, level=args.level,
                      oracle_draws=args.oracle_draws)
        for spec, sizes in grid
    ]
    merged_rows = [row for tab in tables for row in tab.rows]
    config = {
        "command": "simulate", "paper_table": args.paper_table,
        "model": args.model, "d": args.d, "reps": args.reps, "seed": args.seed,
        "jobs": args.jobs, "lambda": "cv" if lam == "cv" else list(lam),
        "cv_folds": args.cv_folds, "cv_rule": args.cv_rule or "default",
        "level": args.level,
        "oracle_draws": args.oracle_draws, "format": args.format,
    }
    merged = sim.MetricsTable(rows=merged_rows, reps=args.reps,
                              mc_seed=args.seed, config=config)
    if args.format == "csv":
        return merged.to_csv()
    return json.dumps(merged.to_json_dict(), indent=2, sort_keys=True)


def _fail(code: int, exc: Exception) -> int:
    obj = {"error": {"type": type(exc).__name__,
                     "module": type(exc).__module__.rsplit(".", 1)[-1],
                     "message": str(exc)}}
    sys.stderr.write(json.dumps(obj) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            text = run_estimate(args)
        else:
            text = run_simulate(args)
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except ds.DataError as exc:
        return _fail(EXIT_DATA, exc)
    except (SolverError, EstimatorError) as exc:
        return _fail(EXIT_SOLVER, exc)
    except OSError as exc:
        return _fail(EXIT_DATA, exc)
    _write(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
