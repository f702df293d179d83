"""Command-line entry point for the full prediction pipeline and its stages.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import seeds
from .augment import PerturbationPolicy, ProgressError, over_sample
from .compose import (
    CompositionError,
    compose,
    load_two_stage,
    predict_batch,
    save_two_stage,
)
from .domain import DEFAULT_CONFIGS, PowerClassBins, config_for_date
from .engine import ModelFormatError, ShapeError, forward, load_model, save_model
from .evaluate import class_metrics, confusion, regression_report
from .ingest import (
    CorpusSpec,
    DataError,
    ParseError,
    filter_report,
    parse_log,
    row_to_observation,
    synthesize_corpus,
    write_observations,
)
from .model_zoo import (
    build_variant,
    classification_targets,
    default_training_config,
    model_inputs,
    regression_targets,
    variant_spec,
)
from .pipeline import PipelineConfig, run_pipeline
from .preprocess import (
    LAYOUTS,
    encode_dataset,
    read_encoded,
    undersample,
    write_encoded,
)
from .training import DivergenceError, TrainingConfig, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3

CHANGE_BY_NAME = {"up": 1, "down": -1, "none": 0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the CLI contract says 1.
    def error(self, message):
        raise UsageError(message)


def _effective_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RTP_SEED")
    if env is not None:
        return int(env)
    return 0


def _cmd_synthesize(args) -> int:
    spec = CorpusSpec(n_observations=args.n, seed=_effective_seed(args))
    write_observations(synthesize_corpus(spec), args.out)
    if args.verbose:
        print(f"wrote {args.n} observations to {args.out}")
    return EXIT_OK


def _cmd_augment(args) -> int:
    observations = [row_to_observation(r) for r in parse_log(args.infile)]
    generated = over_sample(
        observations,
        DEFAULT_CONFIGS,
        n=args.n,
        change=CHANGE_BY_NAME[args.change],
        policy=PerturbationPolicy(),
        seed=_effective_seed(args),
    )
    write_observations(generated, args.out)
    if args.verbose:
        print(f"wrote {len(generated)} augmented observations to {args.out}")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    if args.layout not in LAYOUTS:
        raise UsageError(f"unknown layout {args.layout!r}; valid: {sorted(LAYOUTS)}")
    observations, counts = filter_report(parse_log(args.infile))
    samples = encode_dataset(observations, LAYOUTS[args.layout], DEFAULT_CONFIGS)
    if args.balance:
        samples = undersample(samples, _effective_seed(args))
    write_encoded(samples, args.out)
    if args.verbose:
        print(
            f"encoded {len(samples)} samples (excluded: {counts.too_long} long, "
            f"{counts.shutdown} shutdowns, {counts.no_change} unchanged)"
        )
    return EXIT_OK


def _load_training_config(path: str | None, variant_id: str, seed: int) -> TrainingConfig:
    config = default_training_config(variant_id, seed)
    if path is None:
        return config
    with open(path) as handle:
        doc = json.load(handle)
    if "adam_betas" in doc:
        doc["adam_betas"] = tuple(doc["adam_betas"])
    return replace(config, **doc)


def _cmd_train(args) -> int:
    samples = read_encoded(args.data)
    if not samples:
        raise DataError(f"no encoded samples in {args.data}")
    seed = _effective_seed(args)
    spec = variant_spec(args.variant)
    probs = None
    if spec.task == "regressor":
        if not args.stage1_model or not args.stage1_data:
            raise UsageError(
                f"variant {args.variant} is a regressor; --stage1-model and "
                "--stage1-data (encoded with the paired classifier layout) are required"
            )
        classifier = load_model(args.stage1_model)
        stage1_samples = read_encoded(args.stage1_data)
        if len(stage1_samples) != len(samples):
            raise DataError(
                f"stage-1 data rows ({len(stage1_samples)}) do not align with "
                f"training rows ({len(samples)})"
            )
        probs = np.atleast_2d(
            forward(classifier, model_inputs(stage1_samples, classifier.variant_id))
        )
        targets = regression_targets(samples)
    else:
        targets = classification_targets(samples)

    model = build_variant(args.variant, seeds.subseed(seed, f"init/{args.variant}"))
    tc = _load_training_config(args.config, args.variant, seeds.subseed(seed, f"train/{args.variant}"))
    trained, history = train(model, model_inputs(samples, args.variant, class_probs=probs), targets, tc)
    save_model(trained, args.out)
    if args.verbose:
        best = history.records[history.best_epoch - 1]
        print(
            f"trained {args.variant}: {history.n_epochs} epochs, "
            f"best epoch {history.best_epoch}, val_loss {best['val_loss']:.4f}"
        )
    return EXIT_OK


def _cmd_compose(args) -> int:
    model = compose(args.stage1, args.stage2)
    save_two_stage(model, args.out)
    if args.verbose:
        print(f"composed {model.stage1.variant_id}+{model.stage2.variant_id} -> {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    observations, _ = filter_report(parse_log(args.data))
    bins = PowerClassBins()
    with open(args.model) as handle:
        doc = json.load(handle)
    is_two_stage = isinstance(doc, dict) and doc.get("kind") == "two-stage"

    report: dict
    rows: list[list]
    if is_two_stage:
        model = load_two_stage(args.model)
        s1 = encode_dataset(observations, variant_spec(model.stage1.variant_id).layout, DEFAULT_CONFIGS, bins)
        s2 = encode_dataset(observations, variant_spec(model.stage2.variant_id).layout, DEFAULT_CONFIGS, bins)
        joint = predict_batch(model, s1, s2)
        true = [s.class_index for s in s1]
        pred = [p.predicted_class for p in joint]
        metrics = class_metrics(confusion(true, pred))
        targets = np.array([s.regression_target for s in s2])
        norms = np.array([p.power_norm for p in joint])
        correct = [p == t for p, t in zip(pred, true)]
        reg = regression_report(targets, norms, correct)
        report = {
            "classification": metrics.to_dict(),
            "confusion": confusion(true, pred).to_lists(),
            "regression": reg.to_dict(),
        }
        rows = [
            [i, t, p, abs(float(n) - float(tg))]
            for i, (t, p, n, tg) in enumerate(zip(true, pred, norms, targets), start=1)
        ]
        header = ["row", "true_class", "predicted_class", "abs_error_norm"]
    else:
        model = load_model(args.model)
        if model.variant_id not in LAYOUTS:
            raise DataError(f"model {args.model} has unknown variant id {model.variant_id!r}")
        samples = encode_dataset(observations, LAYOUTS[model.variant_id], DEFAULT_CONFIGS, bins)
        out = np.atleast_2d(forward(model, model_inputs(samples, model.variant_id)))
        true = [s.class_index for s in samples]
        pred = [int(c) for c in np.argmax(out, axis=1)]
        metrics = class_metrics(confusion(true, pred))
        report = {"classification": metrics.to_dict(), "confusion": confusion(true, pred).to_lists()}
        rows = [[i, t, p] for i, (t, p) in enumerate(zip(true, pred), start=1)]
        header = ["row", "true_class", "predicted_class"]

    with open(args.out, "w") as handle:
        json.dump(report, handle, sort_keys=True, indent=2)
        handle.write("\n")
    if args.errors:
        with open(args.errors, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
    if args.verbose:
        print(f"wrote report to {args.out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_two_stage(args.model)
    observations = [row_to_observation(r) for r in parse_log(args.infile)]
    predictions = [
        (i, predict_batch(
            model,
            [  # encode per stage layout
                *_encode_for(model.stage1.variant_id, obs)
            ],
            [*_encode_for(model.stage2.variant_id, obs)],
        )[0])
        for i, obs in enumerate(observations, start=1)
    ]
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["row"] + [f"prob_{i}" for i in range(5)] + ["predicted_class", "power_norm", "power_watts"]
        )
        for i, p in predictions:
            writer.writerow(
                [i, *[repr(v) for v in p.class_probs], p.predicted_class,
                 repr(p.power_norm), repr(p.power_watts)]
            )
    if args.verbose:
        print(f"wrote {len(predictions)} predictions to {args.out}")
    return EXIT_OK


def _encode_for(variant_id, obs):
    from .preprocess import encode

    config = config_for_date(obs.date, DEFAULT_CONFIGS)
    return [encode(obs, LAYOUTS[variant_id], config)]


def _cmd_pipeline(args) -> int:
    if args.config:
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    if args.out_dir:
        config.out_dir = args.out_dir
    if args.seed is not None or os.environ.get("RTP_SEED"):
        config.seed = _effective_seed(args)
    report = run_pipeline(config)
    if args.verbose:
        for vid, row in report["classifiers"].items():
            print(f"{vid}: accuracy {row['test_accuracy']:.3f} macro-F1 {row['test_macro_f1']:.3f}")
        for vid, row in report["regressors"].items():
            print(f"{vid}: test MAE {row['regression']['mae']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rtp", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides RTP_SEED)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="generate a synthetic transient corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("augment", help="physics-guided oversampling of a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--change", choices=sorted(CHANGE_BY_NAME), default="none")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("preprocess", help="normalize, bin, and encode a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--balance", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--variant", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="JSON TrainingConfig overrides")
    p.add_argument("--out", required=True)
    p.add_argument("--stage1-model", default=None, help="classifier model (regressors only)")
    p.add_argument("--stage1-data", default=None, help="aligned classifier-layout data")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compose", help="chain a classifier and a regressor")
    p.add_argument("--stage1", required=True)
    p.add_argument("--stage2", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("evaluate", help="evaluate a model against a transient CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--errors", default=None, help="per-sample CSV output")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="joint predictions from a two-stage model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("pipeline", help="run the full experiment")
    p.add_argument("--config", default=None, help="JSON PipelineConfig file")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (
        ParseError,
        DataError,
        ModelFormatError,
        CompositionError,
        ShapeError,
        ProgressError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
