"""``modelconf`` command line.

Subcommands:

* ``analyze``  confidence set of models for a CSV dataset
* ``simulate`` Monte Carlo experiment from a flat config file
* ``report``   publication-style rendering of a results CSV
* ``effects``  marginal factor effects across several simulation runs
* ``calibrate`` null-calibration rejection rates for a config

Exit codes: 0 success, 2 malformed input or config, 3 statistical
preconditions not met, 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from app.cli_config import load_config
from app.core.errors import (
    ConfigError,
    InputFormatError,
    InsufficientDataError,
    ModelConfError,
)
from app.core.logging import get_logger, setup_logging
from app.core.rng import Stream, derive_seed, method_key, stream
from app.core.settings import settings
from app.models.schemas import (
    AnalysisRequest,
    ConfidenceSet,
    ExperimentTable,
    ReductionResult,
    SimulationConfig,
)
from app.services.confset import build_confidence_set, summarize
from app.services.effects import marginal_effects
from app.services.modeltest import make_tester
from app.services.reduce import cox_selection_stability, make_reducer, split_indices
from app.services.simharness import (
    ExperimentRunner,
    dataset_digest,
    experiment_cells,
    run_null_calibration,
)
from app.services.varest import mrcv_variance
from app.utils.csv_io import (
    read_design_csv,
    read_replicates_csv,
    read_results_csv,
    write_replicates_csv,
    write_results_csv,
)
from app.utils.formatting import render_effects, render_experiment, render_summary
from app.utils.json_utils import json_dumps, write_json, write_jsonl

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2
EXIT_PRECONDITION = 3

_METHOD_CHOICES = {
    "cosufficient": "cosufficient",
    "ancillary": "ancillary",
    "naive-f": "naive_f",
    "split-f": "split_f",
}


# --------------------------------------------------------------------------- #
# analyze
# --------------------------------------------------------------------------- #


def _load_response(
    request: AnalysisRequest,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    X, y, names = read_design_csv(request.data_path, request.response_column)
    if request.log_response:
        if np.any(y <= 0):
            raise InputFormatError(
                f"{request.data_path}: --log-response needs a positive response",
                details={"non_positive": int(np.sum(y <= 0))},
            )
        y = np.log(y)
    return X, y, names


def _reduce(
    request: AnalysisRequest, X: np.ndarray, y: np.ndarray
) -> tuple[ReductionResult, dict[str, int]]:
    if request.method == "split_f":
        train, _ = split_indices(X.shape[0], request.split_frac)
        grid_seed = derive_seed(request.seed, 0, Stream.GRID, 1)
        rows_X, rows_y = X[train], y[train]
    else:
        grid_seed = derive_seed(request.seed, 0, Stream.GRID)
        rows_X, rows_y = X, y
    reducer = make_reducer(
        request.reducer,
        max_keep=request.max_keep,
        seed=grid_seed,
        intercept=request.intercept,
    )
    return reducer(rows_X, rows_y), {"grid_seed": grid_seed}


def _model_records(confidence_set: ConfidenceSet, names: Sequence[str]) -> list:
    return [
        {
            "indices": list(model.indices),
            "variables": model.names(names),
            "size": model.size,
            "p_value": confidence_set.p_values.get(str(model)),
        }
        for model in confidence_set.accepted
    ]


def cmd_analyze(request: AnalysisRequest) -> int:
    started = time.perf_counter()
    X, y, names = _load_response(request)
    n, p = X.shape
    if n < request.max_keep + int(request.intercept) + 2:
        raise InsufficientDataError(
            "too few observations for the requested reduction",
            details={"n": n, "max_keep": request.max_keep},
            suggestion="Lower --max-keep.",
        )

    reduction, seeds = _reduce(request, X, y)
    encompassing = reduction.selected
    label = request.method
    if request.method == "cosufficient":
        label = f"cosufficient_k{request.k}"

    variance = None
    if request.method in {"cosufficient", "ancillary"}:
        shuffle_rng = None
        if request.shuffle_halves:
            shuffle_rng = stream(request.seed, 0, Stream.VARIANCE)
        variance = mrcv_variance(
            X,
            y,
            make_reducer("lasso", max_keep=request.max_keep),
            request.gamma_frac,
            shuffle_rng,
            intercept=request.intercept,
        )

    noise_key = [request.seed, 0, int(Stream.NOISE), method_key(label)]
    if encompassing.size == 0:
        logger.warning("analyze.empty_reduction", extra={"reducer": request.reducer})
        confidence_set = ConfidenceSet(
            alpha=request.alpha,
            method=label,
            encompassing=encompassing,
            max_size=1,
            n_tested=0,
        )
    else:
        tester = make_tester(
            request.method,
            y=y,
            k=request.k,
            variance=variance,
            encompassing=encompassing,
            noise_seed=noise_key,
            split_frac=request.split_frac,
            intercept=request.intercept,
            tail=request.tail,
        )
        confidence_set = build_confidence_set(
            X,
            y,
            encompassing,
            tester,
            request.alpha,
            min(request.max_model_size, encompassing.size),
            method=label,
            workers=request.workers,
        )
    report = summarize(confidence_set)

    stability = None
    if request.stability_repeats and request.reducer == "cox":
        level = reduction.final_alpha or settings.cox_alpha_start
        frequencies = cox_selection_stability(
            X,
            y,
            level,
            request.stability_repeats,
            stream(request.seed, 0, Stream.STABILITY),
            intercept=request.intercept,
        )
        stability = {
            "alpha": level,
            "repeats": request.stability_repeats,
            "frequency": {names[j]: float(f) for j, f in enumerate(frequencies)},
        }

    out = Path(request.output_path)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "models.jsonl", _model_records(confidence_set, names))
    summary = report.model_dump(mode="json")
    summary["variables"] = {str(idx): names[idx] for idx in encompassing.indices}
    write_json(out / "summary.json", summary)
    (out / "summary.txt").write_text(render_summary(report, names), "utf-8")
    manifest = {
        "command": "analyze",
        "version": settings.app_version,
        "request": request.model_dump(mode="json"),
        "data": {"n": n, "p": p, "digest": dataset_digest(X, y), "columns": names},
        "seeds": {
            "master": request.seed,
            **seeds,
            "noise_key": noise_key,
            "variance_shuffle_key": (
                [request.seed, 0, int(Stream.VARIANCE)]
                if request.shuffle_halves
                else None
            ),
            "stability_key": (
                [request.seed, 0, int(Stream.STABILITY)] if stability else None
            ),
        },
        "reduction": reduction.model_dump(mode="json", exclude={"trace"}),
        "encompassing": {
            "indices": list(encompassing.indices),
            "variables": encompassing.names(names),
        },
        "variance": variance.model_dump(mode="json") if variance else None,
        "confidence_set": {
            "accepted": confidence_set.size,
            "tested": confidence_set.n_tested,
            "undetermined": confidence_set.n_undetermined,
        },
        "stability": stability,
        "elapsed_s": round(time.perf_counter() - started, 3),
    }
    write_json(out / "manifest.json", manifest)
    logger.info(
        "analyze.done",
        extra={
            "accepted": confidence_set.size,
            "tested": confidence_set.n_tested,
            "out": str(out),
        },
    )
    print(f"{confidence_set.size} of {confidence_set.n_tested} models accepted")
    return EXIT_OK


# --------------------------------------------------------------------------- #
# simulate / report / effects / calibrate
# --------------------------------------------------------------------------- #


def _seed_manifest(config: SimulationConfig) -> dict:
    labels = [label for label, _ in experiment_cells(config)]
    return {
        "master": config.seed,
        "data_key": "[seed, replicate, 0]",
        "noise_key": "[seed, replicate, 2, method_key]",
        "method_keys": {label: method_key(label) for label in dict.fromkeys(labels)},
        "replicates": [
            {
                "replicate": index,
                "seed_used": derive_seed(config.seed, index),
                "grid_seed": derive_seed(config.seed, index, Stream.GRID),
                "train_grid_seed": derive_seed(config.seed, index, Stream.GRID, 1),
            }
            for index in range(config.replicates)
        ],
    }


def cmd_simulate(config_path: str, out_dir: str, workers: int | None = None) -> int:
    config, config_hash = load_config(config_path)
    runner = ExperimentRunner(config, workers=workers)
    started = time.perf_counter()
    table = runner.run()
    elapsed = time.perf_counter() - started

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(out / "results.csv", table.rows)
    write_replicates_csv(out / "replicates.csv", table.results)
    (out / "results.txt").write_text(render_experiment(table.rows), "utf-8")
    write_json(
        out / "manifest.json",
        {
            "command": "simulate",
            "version": settings.app_version,
            "config_path": str(config_path),
            "config_hash": config_hash,
            "config": config.model_dump(mode="json"),
            "factors": table.factors,
            "seeds": _seed_manifest(config),
            "failures": {
                f"{row.method}/{row.reducer}": row.failures for row in table.rows
            },
            "timing": {"elapsed_s": round(elapsed, 3), **runner.tally.timing()},
        },
    )
    print(render_experiment(table.rows), end="")
    return EXIT_OK


def _results_path(path: str) -> Path:
    candidate = Path(path)
    return candidate / "results.csv" if candidate.is_dir() else candidate


def cmd_report(results_path: str, style: str = "text") -> int:
    rows = read_results_csv(_results_path(results_path))
    print(render_experiment(rows, style), end="")
    return EXIT_OK


def load_run(run_dir: str | Path) -> ExperimentTable:
    """Experiment table of a finished ``simulate`` run directory."""

    run = Path(run_dir)
    manifest_path = run / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(
            f"cannot read run manifest {manifest_path}",
            details={"path": str(manifest_path)},
        ) from exc
    config = manifest.get("config") or {}
    return ExperimentTable(
        rows=read_results_csv(run / "results.csv"),
        factors=manifest.get("factors") or {},
        replicates=int(config.get("replicates", 0)),
        results=read_replicates_csv(run / "replicates.csv"),
    )


def cmd_effects(run_dirs: Sequence[str], style: str = "text") -> int:
    table = marginal_effects([load_run(run_dir) for run_dir in run_dirs])
    print(render_effects(table, style), end="")
    return EXIT_OK


def cmd_calibrate(config_path: str, replicates: int | None = None) -> int:
    config, _ = load_config(config_path)
    report = run_null_calibration(config, replicates=replicates)
    print(json_dumps(report.model_dump(mode="json"), indent=2, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------- #
# argument parsing
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelconf",
        description="Confidence sets of sparse Gaussian linear regression models.",
    )
    parser.add_argument("--log-level", default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", help="confidence set for a CSV dataset")
    analyze.add_argument("data_path")
    analyze.add_argument("--response-column", default="y")
    analyze.add_argument("--alpha", type=float, default=settings.default_alpha)
    analyze.add_argument(
        "--method", choices=sorted(_METHOD_CHOICES), default="cosufficient"
    )
    analyze.add_argument("--k", type=int, default=settings.default_k)
    analyze.add_argument("--reducer", choices=["cox", "lasso"], default="cox")
    analyze.add_argument(
        "--max-model-size", type=int, default=settings.default_max_model_size
    )
    analyze.add_argument("--max-keep", type=int, default=settings.default_max_keep)
    analyze.add_argument(
        "--gamma-frac", type=float, default=settings.default_gamma_frac
    )
    analyze.add_argument("--split-frac", type=float, default=settings.split_frac)
    analyze.add_argument("--seed", type=int, default=settings.default_seed)
    analyze.add_argument(
        "--intercept", action=argparse.BooleanOptionalAction, default=True
    )
    analyze.add_argument("--log-response", action="store_true")
    analyze.add_argument(
        "--tail", choices=["upper", "lower", "two_sided"], default="upper"
    )
    analyze.add_argument("--shuffle-halves", action="store_true")
    analyze.add_argument("--stability-repeats", type=int, default=0)
    analyze.add_argument("--workers", type=int, default=settings.workers)
    analyze.add_argument("--out", default="modelconf_out")

    simulate = commands.add_parser("simulate", help="run a simulation config")
    simulate.add_argument("config_path")
    simulate.add_argument("--out", default="modelconf_sim")
    simulate.add_argument("--workers", type=int, default=None)

    report = commands.add_parser("report", help="render a results CSV")
    report.add_argument("results_path")
    report.add_argument("--format", choices=["text", "markdown"], default="text")

    effects = commands.add_parser("effects", help="factor effects across runs")
    effects.add_argument("run_dirs", nargs="+")
    effects.add_argument("--format", choices=["text", "markdown"], default="text")

    calibrate = commands.add_parser("calibrate", help="null-calibration suite")
    calibrate.add_argument("config_path")
    calibrate.add_argument("--replicates", type=int, default=None)
    return parser


def _request_from_args(args: argparse.Namespace) -> AnalysisRequest:
    try:
        return AnalysisRequest(
            data_path=args.data_path,
            response_column=args.response_column,
            alpha=args.alpha,
            method=_METHOD_CHOICES[args.method],
            k=args.k,
            max_model_size=args.max_model_size,
            max_keep=args.max_keep,
            reducer=args.reducer,
            gamma_frac=args.gamma_frac,
            split_frac=args.split_frac,
            seed=args.seed,
            intercept=args.intercept,
            log_response=args.log_response,
            tail=args.tail,
            shuffle_halves=args.shuffle_halves,
            stability_repeats=args.stability_repeats,
            workers=args.workers,
            output_path=args.out,
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{field}: {first['msg']}") from exc


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "analyze":
        return cmd_analyze(_request_from_args(args))
    if args.command == "simulate":
        return cmd_simulate(args.config_path, args.out, args.workers)
    if args.command == "report":
        return cmd_report(args.results_path, args.format)
    if args.command == "effects":
        return cmd_effects(args.run_dirs, args.format)
    return cmd_calibrate(args.config_path, args.replicates)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return _dispatch(args)
    except (InputFormatError, ConfigError) as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except ModelConfError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        if exc.suggestion:
            print(f"hint: {exc.suggestion}", file=sys.stderr)
        return EXIT_PRECONDITION
    except Exception:
        logger.exception("cli.unexpected", extra={"command": args.command})
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
