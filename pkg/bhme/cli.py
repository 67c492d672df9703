"""Command-line front end: generate, train, select, predict, evaluate, baseline.

Every command writes plain CSV/JSON files. Errors are reported as one line
``error kind=<kind> message=<text>`` on stderr with exit codes 2 (usage),
3 (data) or 4 (numerical).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from bhme import __version__
from bhme.core.baseline import (
    FeatureConfig,
    FeatureKind,
    fit_baseline,
    predict_baseline,
)
from bhme.core.config import Settings, load_settings
from bhme.core.datasets import (
    ArmGeometry,
    classify_region,
    end_effector_error,
    gen_arm_dataset,
    gen_toy,
    region_medians,
    standardize,
    unstandardize_targets,
)
from bhme.core.delimited import (
    SCHEMAS,
    Schema,
    infer_schema,
    load_delimited,
    load_table,
    save_delimited,
    select_columns,
    write_rows,
)
from bhme.core.errors import EXIT_DATA, EXIT_USAGE, DataError, HmeError
from bhme.core.predictor import GatingMode, PredictMode, predict_batch, standardized_mse
from bhme.core.selection import (
    SweepExecutor,
    summary_document,
    sweep,
    write_ockham_csv,
    write_runs_csv,
)
from bhme.core.serialization import (
    BaselineDocument,
    baseline_document,
    baseline_from_document,
    load_model_document,
    model_document,
    model_standardization,
    posterior_from_document,
    write_document,
)
from bhme.core.variational import TrainingConfig, train
from bhme.models.hme import BIAS_COLUMN, Dataset
from bhme.models.topology import (
    TreeTopology,
    balanced_topology,
    enumerate_topologies,
    parse_shape,
)

logger = logging.getLogger("bhme.cli")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors follow the one-line error format."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error kind=usage message={message}\n")


# ---------------------------------------------------------------------------
# Helpers


def _resolve_schema(path: str, name: str, num_targets: int) -> Schema:
    if name != "auto":
        return SCHEMAS[name]
    header, _ = load_table(path)
    for schema in SCHEMAS.values():
        if set(header) == set(schema.columns):
            return schema
    return infer_schema(path, num_targets)


def _load_training_data(args, schema: Schema | None = None) -> Dataset:
    schema = schema or _resolve_schema(args.data, args.schema, args.targets)
    dataset = load_delimited(args.data, schema)
    if args.standardize:
        dataset, _ = standardize(dataset)
    return dataset


def _topology(args, settings: Settings) -> TreeTopology:
    if args.topology:
        return parse_shape(args.topology)
    if args.num_experts > settings.MAX_ENUMERATION_EXPERTS:
        return balanced_topology(args.num_experts)
    shapes = enumerate_topologies(args.num_experts, settings.MAX_ENUMERATION_EXPERTS)
    if not 0 <= args.topology_index < len(shapes):
        raise DataError(
            f"--topology-index must be in 0..{len(shapes) - 1} "
            f"for {args.num_experts} experts"
        )
    return shapes[args.topology_index]


def _model_inputs(doc, path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """(raw inputs, targets or None) of a CSV, in the model's column order.

    A headerless file holds the model's inputs followed by its targets, or
    the inputs alone.
    """
    columns = [name for name in doc.input_columns if name != BIAS_COLUMN]
    try:
        header, values = load_table(
            path, default_header=columns + list(doc.target_columns)
        )
    except DataError:
        header, values = load_table(path, default_header=columns)
    raw = select_columns(header, values, columns, path)
    targets = None
    if all(name in header for name in doc.target_columns):
        targets = select_columns(header, values, doc.target_columns, path)
    return raw, targets


def _predict_targets(doc, raw: np.ndarray, args, settings: Settings):
    """Predictions in original units with the chosen experts and mixing.

    The last two are None for a baseline model.
    """
    stats = model_standardization(doc)
    scaled = raw if stats is None else (raw - stats.input_mean) / stats.input_scale
    if isinstance(doc, BaselineDocument):
        points = predict_baseline(baseline_from_document(doc), scaled)
        chosen = mixing = None
    else:
        posterior = posterior_from_document(doc)
        inputs = np.hstack([scaled, np.ones((scaled.shape[0], 1))])
        batch = predict_batch(
            inputs,
            posterior,
            mode=args.mode or settings.PREDICT_MODE,
            gating=args.gating or settings.GATING_MODE,
        )
        points, chosen, mixing = batch.points, batch.experts_chosen, batch.mixing
    if stats is not None:
        points = unstandardize_targets(points, stats)
    return np.atleast_2d(points), chosen, mixing


def _write_predictions(path, doc, raw, points, chosen, mixing) -> None:
    columns = [name for name in doc.input_columns if name != BIAS_COLUMN]
    header = columns + list(doc.target_columns)
    if chosen is not None:
        header += ["expert"] + [f"mixing_{j}" for j in range(mixing.shape[1])]
    rows = []
    for n in range(raw.shape[0]):
        row = list(raw[n]) + list(points[n])
        if chosen is not None:
            row += [int(chosen[n])] + list(mixing[n])
        rows.append(row)
    write_rows(path, header, rows)


def _geometry(settings: Settings) -> ArmGeometry:
    return ArmGeometry(link1=settings.ARM_LINK1, link2=settings.ARM_LINK2)


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args, settings: Settings) -> int:
    if args.kind == "toy":
        n = args.n or settings.TOY_SIZE
        noise = settings.TOY_NOISE_SD if args.noise_sd is None else args.noise_sd
        dataset = gen_toy(n, noise, args.seed)
    else:
        n = args.n or settings.ARM_TRAIN_SIZE
        dataset = gen_arm_dataset(n, _geometry(settings), args.seed)
    save_delimited(dataset, args.out)
    logger.info("Wrote %d %s points to %s", dataset.num_points, args.kind, args.out)
    return 0


def cmd_train(args, settings: Settings) -> int:
    dataset = _load_training_data(args)
    tree = _topology(args, settings)
    config = TrainingConfig.from_settings(settings)
    posterior, trace = train(tree, dataset, config, args.seed)
    write_document(model_document(posterior, trace, dataset, args.seed), args.out)
    trace_path = args.trace or str(Path(args.out).with_suffix(".trace.csv"))
    write_rows(
        trace_path,
        ("iteration", "bound", "inverse_temperature"),
        (
            [k, bound, s]
            for k, (bound, s) in enumerate(
                zip(trace.bound_history, trace.temperature_history)
            )
        ),
    )
    if not trace.converged:
        logger.warning("Model written but training did not converge")
    print(
        f"topology={tree.shape} bound={trace.final_bound!r} "
        f"converged={str(trace.converged).lower()} iterations={trace.iterations_run}"
    )
    return 0


def cmd_select(args, settings: Settings) -> int:
    schema = _resolve_schema(args.data, args.schema, args.targets)
    dataset = _load_training_data(args, schema)
    config = TrainingConfig.from_settings(settings)
    restarts = args.restarts or settings.SELECT_RESTARTS
    report = sweep(
        dataset,
        range(args.min_experts, args.max_experts + 1),
        restarts,
        args.base_seed,
        config,
        executor=args.executor or settings.SWEEP_EXECUTOR,
        workers=settings.SWEEP_WORKERS,
        max_experts=settings.MAX_ENUMERATION_EXPERTS,
    )
    prefix = args.out
    write_runs_csv(report, f"{prefix}.runs.csv")
    write_ockham_csv(report, f"{prefix}.ockham.csv")
    write_document(summary_document(report), f"{prefix}.summary.json")
    if args.model_out:
        best = report.best
        posterior, trace = train(report.best_topology, dataset, config, best.seed)
        write_document(
            model_document(posterior, trace, dataset, best.seed), args.model_out
        )
    print(
        f"best={report.best.topology} restart={report.best.restart} "
        f"bound={report.best.final_bound!r}"
    )
    return 0


def cmd_predict(args, settings: Settings) -> int:
    doc = load_model_document(args.model)
    raw, _ = _model_inputs(doc, args.input)
    points, chosen, mixing = _predict_targets(doc, raw, args, settings)
    _write_predictions(args.out, doc, raw, points, chosen, mixing)
    logger.info("Wrote %d predictions to %s", raw.shape[0], args.out)
    return 0


def cmd_evaluate(args, settings: Settings) -> int:
    doc = load_model_document(args.model)
    raw, targets = _model_inputs(doc, args.test)
    if targets is None:
        raise DataError(f"{args.test}: target columns {doc.target_columns} missing")
    points, _, _ = _predict_targets(doc, raw, args, settings)

    if args.metric == "smse":
        value = standardized_mse(points, targets, doc.target_variance)
        print(f"metric=smse value={value!r}")
        return 0

    if raw.shape[1] != 2 or points.shape[1] != 2:
        raise DataError("end-effector evaluation needs 2 inputs and 2 angle targets")
    geometry = _geometry(settings)
    errors = end_effector_error(points, raw, geometry)
    regions = classify_region(raw, geometry)
    if args.out:
        write_rows(
            args.out,
            ("x1", "x2", "theta1", "theta2", "error", "region"),
            (
                [*raw[n], *points[n], errors[n], regions[n].value]
                for n in range(raw.shape[0])
            ),
        )
    medians = region_medians(errors, regions)
    summary = " ".join(f"{key}={value!r}" for key, value in medians.items())
    print(f"metric=end-effector {summary}")
    return 0


def cmd_baseline(args, settings: Settings) -> int:
    schema = _resolve_schema(args.data, args.schema, args.targets)
    dataset = _load_training_data(args, schema)
    features = FeatureConfig(
        kind=FeatureKind(args.features),
        degree=args.degree,
        num_centers=args.centers,
        width=args.width,
    )
    model = fit_baseline(dataset, features, args.ridge)
    doc = baseline_document(model)
    if args.model_out:
        write_document(doc, args.model_out)
    raw, _ = _model_inputs(doc, args.test)
    points, _, _ = _predict_targets(doc, raw, args, settings)
    _write_predictions(args.out, doc, raw, points, None, None)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--schema",
        choices=["auto", *SCHEMAS],
        default="auto",
        help="column layout; auto matches known headers, else last --targets columns",
    )
    parser.add_argument("--targets", type=int, default=1, help="target columns (auto)")
    parser.add_argument(
        "--standardize",
        action="store_true",
        help="zero-mean unit-variance inputs and targets (statistics are stored)",
    )


def _add_prediction_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in PredictMode])
    parser.add_argument("--gating", choices=[g.value for g in GatingMode])


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="bhme", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bhme {__version__}")
    parser.add_argument("--config", help="flat KEY=VALUE settings file")
    parser.add_argument("--log-level", help="overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="write a synthetic dataset")
    generate.add_argument("kind", choices=["toy", "arm"])
    generate.add_argument("--n", type=int, default=0, help="points (default: config)")
    generate.add_argument("--noise-sd", type=float, help="toy noise level")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", required=True)
    generate.set_defaults(handler=cmd_generate)

    train_cmd = commands.add_parser("train", help="train one HME topology")
    train_cmd.add_argument("data")
    _add_data_options(train_cmd)
    shape = train_cmd.add_mutually_exclusive_group(required=True)
    shape.add_argument("--topology", help="compact shape, e.g. '(E,(E,E))'")
    shape.add_argument("--num-experts", type=int)
    train_cmd.add_argument(
        "--topology-index",
        type=int,
        default=0,
        help="which enumerated shape to use with --num-experts",
    )
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.add_argument("--out", required=True, help="model JSON path")
    train_cmd.add_argument("--trace", help="trace CSV (default: <out>.trace.csv)")
    train_cmd.set_defaults(handler=cmd_train)

    select = commands.add_parser("select", help="sweep topologies and restarts")
    select.add_argument("data")
    _add_data_options(select)
    select.add_argument("--min-experts", type=int, default=1)
    select.add_argument("--max-experts", type=int, required=True)
    select.add_argument("--restarts", type=int, default=0, help="default: config")
    select.add_argument("--base-seed", type=int, default=0)
    select.add_argument("--executor", choices=[e.value for e in SweepExecutor])
    select.add_argument("--out", required=True, help="prefix of the report files")
    select.add_argument("--model-out", help="also write the selected model here")
    select.set_defaults(handler=cmd_select)

    predict = commands.add_parser("predict", help="batch predictions from a model")
    predict.add_argument("model")
    predict.add_argument("input")
    predict.add_argument("--out", required=True)
    _add_prediction_options(predict)
    predict.set_defaults(handler=cmd_predict)

    evaluate = commands.add_parser("evaluate", help="score a model on test data")
    evaluate.add_argument("model")
    evaluate.add_argument("test")
    evaluate.add_argument("--metric", choices=["smse", "end-effector"], default="smse")
    evaluate.add_argument("--out", help="per-point error CSV (end-effector)")
    _add_prediction_options(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    baseline = commands.add_parser("baseline", help="least-squares baseline")
    baseline.add_argument("data")
    baseline.add_argument("test")
    _add_data_options(baseline)
    baseline.add_argument("--features", choices=[k.value for k in FeatureKind])
    baseline.add_argument("--degree", type=int, default=1)
    baseline.add_argument("--centers", type=int, default=20)
    baseline.add_argument("--width", type=float)
    baseline.add_argument("--ridge", type=float, default=1e-6)
    baseline.add_argument("--out", required=True, help="prediction CSV for test")
    baseline.add_argument("--model-out", help="also write the baseline JSON here")
    baseline.set_defaults(handler=cmd_baseline, features="rbf")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s | %(levelname)-8s | %(name)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config and not Path(args.config).is_file():
            raise DataError(f"Config file not found: {args.config}")
        settings = load_settings(args.config)
        _configure_logging(args.log_level or settings.LOG_LEVEL)
        return args.handler(args, settings)
    except HmeError as exc:
        print(f"error kind={exc.kind} message={exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error kind=io message={exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
