"""Command-line interface.

Subcommands: augment, train-toy, predict, ensemble, evaluate, experiment,
report.  Every command is deterministic given its arguments; exit status is
nonzero exactly when an error fires, and errors name the failing stage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .augment import sample_plan, apply_plan
from .ensemble import CLI_STRATEGY_NAMES
from .experiment import (
    DEFAULT_DIFFICULTY,
    ExperimentConfig,
    evaluate_predictions,
    run_experiment,
    summary_table,
)
from .image import read_image, write_image
from .io import (
    read_predictions,
    read_report,
    write_aggregated,
    write_manifest,
    write_plans_csv,
    write_report,
)
from .toymodel import (
    DEFAULT_IMAGE_SIDE,
    DEFAULT_PRIORS,
    build_ensemble_predictions,
    generate_dataset,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    train,
)


def _parse_priors(text):
    priors = tuple(float(p) for p in text.split(","))
    if len(priors) < 2:
        raise argparse.ArgumentTypeError("need at least two class priors")
    return priors


def _add_experiment_flags(p):
    p.add_argument("--seed", type=int, default=0, help="master experiment seed")
    p.add_argument("--samples", type=int, default=2000, help="dataset size n")
    p.add_argument("--priors", type=_parse_priors, default=DEFAULT_PRIORS,
                   metavar="P0,P1,...", help="class priors (comma separated)")
    p.add_argument("--difficulty", type=float, default=DEFAULT_DIFFICULTY,
                   help="generator noise level in [0, 1]")
    p.add_argument("--models", type=int, default=4, help="ensemble members k")
    p.add_argument("--epochs", type=int, default=50, help="training epochs")
    p.add_argument("--lr", type=float, default=0.01, help="SGD learning rate")
    p.add_argument("--batch-size", type=int, default=32, help="SGD batch size")
    p.add_argument("--image-side", type=int, default=DEFAULT_IMAGE_SIDE,
                   help="square image side in pixels")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uqens",
        description="Uncertainty-weighted, test-time-augmented ensembling "
                    "with calibration metrics, on a synthetic ordinal grading task.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("augment", formatter_class=fmt,
                       help="write seeded augmentation replicates of one image")
    p.add_argument("--input", required=True, help="input image (.png or .ppm)")
    p.add_argument("--seed", type=int, default=0, help="augmentation seed")
    p.add_argument("--replicates", type=int, default=5, metavar="R",
                   help="number of augmented replicates to produce")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train-toy", formatter_class=fmt,
                       help="generate a synthetic dataset and train ensemble members")
    _add_experiment_flags(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("predict", formatter_class=fmt,
                       help="predict a stored dataset with stored members")
    p.add_argument("--models", required=True, help="directory of model_*.bin files")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, default=0, help="augmentation seed")
    p.add_argument("--replicates", type=int, default=0, metavar="R",
                   help="augmented replicates per sample (0 = no TTA)")
    p.add_argument("--out", required=True, help="predictions CSV to write")

    p = sub.add_parser("ensemble", formatter_class=fmt,
                       help="aggregate a predictions file with one strategy")
    p.add_argument("--predictions", required=True, help="predictions CSV")
    p.add_argument("--strategy", required=True, choices=CLI_STRATEGY_NAMES)
    p.add_argument("--replicates", type=int, default=None, metavar="R",
                   help="replicate rows to aggregate per (sample, model), "
                        "including the original (default: all available)")
    p.add_argument("--model-index", type=int, default=None,
                   help="member to use for --strategy single")
    p.add_argument("--out", required=True, help="aggregated CSV to write")

    p = sub.add_parser("evaluate", formatter_class=fmt,
                       help="aggregate a predictions file and score it")
    p.add_argument("--predictions", required=True, help="predictions CSV")
    p.add_argument("--strategy", required=True, choices=CLI_STRATEGY_NAMES)
    p.add_argument("--replicates", type=int, default=None, metavar="R",
                   help="replicate rows to aggregate per (sample, model), "
                        "including the original (default: all available)")
    p.add_argument("--bins", type=int, default=10, metavar="M",
                   help="confidence bins for ECE/MCE")
    p.add_argument("--model-index", type=int, default=None,
                   help="member to use for --strategy single")
    p.add_argument("--out", required=True, help="report file to write")

    p = sub.add_parser("experiment", formatter_class=fmt,
                       help="run the full five-strategy comparison")
    _add_experiment_flags(p)
    p.add_argument("--replicates", type=int, default=5, metavar="R",
                   help="augmented replicates per sample for the TTA strategies")
    p.add_argument("--bins", type=int, default=10, metavar="M",
                   help="confidence bins for ECE/MCE")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", formatter_class=fmt,
                       help="print stored report files as a summary table")
    p.add_argument("reports", nargs="+", help="report files to print")
    return parser


def cmd_augment(args):
    img = read_image(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    suffix = Path(args.input).suffix.lower()
    plans = []
    for r in range(1, args.replicates + 1):
        plan = sample_plan(args.seed, stem, r, img.width, img.height)
        plans.append(plan)
        write_image(apply_plan(img, plan), out / f"{stem}_r{r:03d}{suffix}")
    write_plans_csv(plans, out / "plans.csv")


def cmd_train_toy(args):
    out = Path(args.out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    config = _config_from(args, replicates=0, bins=10)
    config.validate()
    from .experiment import derive_seeds  # local to keep CLI import cheap
    from .toymodel import preprocess_dataset

    data_seed, _, member_seeds = derive_seeds(args.seed, args.models)
    dataset = generate_dataset(data_seed, args.samples, args.priors,
                               args.difficulty, args.image_side)
    save_dataset(dataset, out / "dataset")
    train_inputs = preprocess_dataset(dataset, args.image_side)
    for j, seed in enumerate(member_seeds, start=1):
        model = train(train_inputs, seed, args.epochs, args.lr,
                      batch_size=args.batch_size)
        save_model(model, out / "models" / f"model_{j}.bin")
    write_manifest(config.as_dict(), out / "config.json")


def cmd_predict(args):
    models_dir = Path(args.models)
    paths = sorted(models_dir.glob("model_*.bin"))
    if not paths:
        raise ValueError(f"{models_dir}: no model_*.bin files")
    models = [load_model(p) for p in paths]
    dataset = load_dataset(args.dataset, num_classes=models[0].num_classes)
    tta = (args.seed, args.replicates) if args.replicates > 0 else None
    pset = build_ensemble_predictions(models, dataset, tta=tta)
    from .io import write_predictions

    write_predictions(pset, args.out)


def cmd_ensemble(args):
    pset = read_predictions(args.predictions)
    _, aggregated, _ = evaluate_predictions(
        pset, args.strategy, replicates=args.replicates, bins=1,
        model_index=args.model_index,
    )
    dense = pset.dense()
    write_aggregated(dense.sample_ids, aggregated, dense.labels, args.out)


def cmd_evaluate(args):
    pset = read_predictions(args.predictions)
    strategy, _, report = evaluate_predictions(
        pset, args.strategy, replicates=args.replicates, bins=args.bins,
        model_index=args.model_index,
    )
    write_report(report, args.strategy, args.out,
                 replicates=strategy.replicates, models=pset.num_models)


def _config_from(args, replicates, bins):
    return ExperimentConfig(
        seed=args.seed,
        n_samples=args.samples,
        class_priors=args.priors,
        difficulty=args.difficulty,
        models=args.models,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        replicates=replicates,
        bins=bins,
        image_side=args.image_side,
    )


def cmd_experiment(args):
    config = _config_from(args, replicates=args.replicates, bins=args.bins)
    rows = run_experiment(config, args.out)
    sys.stdout.write(summary_table(rows))


def cmd_report(args):
    rows = [(doc.strategy, doc.report) for doc in map(read_report, args.reports)]
    sys.stdout.write(summary_table(rows))


_HANDLERS = {
    "augment": cmd_augment,
    "train-toy": cmd_train_toy,
    "predict": cmd_predict,
    "ensemble": cmd_ensemble,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _HANDLERS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"uqens {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
