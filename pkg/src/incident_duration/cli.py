"""Command-line lifecycle: generate, train, evaluate, compare, predict, serve.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error. All errors go to standard error with the stable prefix ``error:``.
A config file of ``key = value`` lines can seed the training configuration;
command-line flags win over config values. The environment variable
``INCIDENT_DURATION_MODEL`` supplies a default model path.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields as dataclass_fields

from . import artifact, pipeline, reporting, service, synthgen
from .linear import LinearFitError
from .metrics import MetricsError
from .preprocess import PreprocessError, split_records
from .schema import (
    RecordValidationError,
    SchemaError,
    read_incidents_csv,
    record_from_fields,
)

MODEL_ENV_VAR = "INCIDENT_DURATION_MODEL"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_DATA_ERRORS = (
    SchemaError,
    RecordValidationError,
    PreprocessError,
    pipeline.PipelineError,
    artifact.ArtifactError,
    LinearFitError,
    MetricsError,
    FileNotFoundError,
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _config_from_file(path) -> dict:
    known = {f.name: f.type for f in dataclass_fields(pipeline.TrainConfig)}
    out: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise SchemaError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _coerce_config_value(key, value)
    return out


def _coerce_config_value(key: str, value: str):
    defaults = pipeline.TrainConfig()
    current = getattr(defaults, key)
    if isinstance(current, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        if key == "band_regressors":
            return tuple(tuple(p.split("+")) for p in value.split(";"))
        return tuple(value.split(","))
    return value


def _build_config(args) -> pipeline.TrainConfig:
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(_config_from_file(args.config))
    if getattr(args, "features", None):
        overrides["feature_set"] = args.features
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    base = pipeline.TrainConfig().to_state()
    base.update(overrides)
    return pipeline.TrainConfig.from_state(base)


def _default_model(args) -> str:
    path = getattr(args, "model", None) or os.environ.get(MODEL_ENV_VAR)
    if not path:
        raise SchemaError(f"no model path given (use --model or ${MODEL_ENV_VAR})")
    return path


def cmd_generate(args) -> int:
    cfg = synthgen.GeneratorConfig(n_records=args.n, seed=args.seed if args.seed is not None else 7)
    synthgen.generate_to_csv(cfg, args.out)
    print(f"wrote {cfg.n_records} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _build_config(args)
    records = read_incidents_csv(args.data)
    model = pipeline.train_framework(records, config)
    artifact.save_model(model, args.out)
    train, holdout, valid = split_records([r for r in records if r.duration_minutes is not None], config.split_spec())
    _, test_tree = pipeline.evaluate_framework(model, holdout)
    _, valid_tree = pipeline.evaluate_framework(model, valid)
    report = {
        "data": {"n_records": len(records), "train": len(train), "test": len(holdout), "validation": len(valid)},
        "config": {"feature_set": config.feature_set, "seed": config.seed},
        "test": test_tree,
        "validation": valid_tree,
    }
    report_path = args.report or args.out + ".report.txt"
    reporting.write_report(report, report_path)
    print(f"model saved to {args.out}; training report at {report_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = artifact.load_model(_default_model(args))
    records = read_incidents_csv(args.data)
    _, tree = pipeline.evaluate_framework(model, records)
    reporting.write_report(tree, args.out)
    print(f"evaluation report written to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _build_config(args)
    records = read_incidents_csv(args.data)
    result = pipeline.compare_frameworks(records, config)
    reporting.write_report(result, args.out)
    print(f"comparison report written to {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = artifact.load_model(_default_model(args))
    if args.record:
        records = read_incidents_csv(args.record)
        if not records:
            return _fail(f"no records in {args.record}", EXIT_DATA)
        record = records[0]
    else:
        if not args.field:
            return _fail("predict needs --record FILE or --field name=value pairs", EXIT_USAGE)
        fields = {}
        for item in args.field:
            name, sep, value = item.partition("=")
            if not sep:
                return _fail(f"--field expects name=value, got {item!r}", EXIT_USAGE)
            if name == "responders":
                fields[name] = value.split("|") if value else []
            else:
                fields[name] = value
        record = record_from_fields(fields, default_id="cli")
    result = pipeline.predict_incident(model, record)
    print(f"band = {result.band.label}")
    print(f"duration_minutes = {result.duration_minutes:.2f}")
    probs = ", ".join(f"{lbl}={p:.4f}" for lbl, p in zip("SML", result.band_probabilities))
    print(f"band_probabilities = {probs}")
    print(f"model_version = {result.model_version}")
    return EXIT_OK


def cmd_serve(args) -> int:
    host, _, port = args.bind.partition(":")
    if not port:
        return _fail(f"--bind expects host:port, got {args.bind!r}", EXIT_USAGE)
    server = service.serve(host or "127.0.0.1", int(port), _default_model(args))
    print(f"serving on http://{host or '127.0.0.1'}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incident-duration",
        description="Two-stage traffic incident duration prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic incident CSV")
    p.add_argument("--n", type=int, default=6832)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the framework and save an artifact")
    p.add_argument("--data", required=True)
    p.add_argument("--features", choices=["fs1", "fs2"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on labeled data")
    p.add_argument("--data", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run the five-framework comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--features", choices=["fs1", "fs2"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="predict one incident")
    p.add_argument("--model", default=None)
    p.add_argument("--record", default=None, help="CSV file; the first record is used")
    p.add_argument("--field", action="append", default=[], metavar="NAME=VALUE")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="serve predictions over HTTP")
    p.add_argument("--model", default=None)
    p.add_argument("--bind", default="127.0.0.1:8321")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage problems
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        return _fail(str(exc), EXIT_DATA)
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(f"internal: {type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
