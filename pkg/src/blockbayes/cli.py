"""Command-line interface: ``extract``, ``train``, ``evaluate`` and ``sweep``.

Settings come from defaults, then an optional flat ``key=value`` config file
(``--config``), then explicit flags; later sources win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import BlockBayesError, ConfigurationError
from .evaluation import format_confusion, format_table, reports_to_csv
from .pipeline import (
    DescriptorTable,
    PipelineConfig,
    TrainedModel,
    evaluate_model,
    extract_directory,
    load_config_file,
    sweep_clusters,
    sweep_to_csv,
    train_model,
)

log = logging.getLogger("blockbayes")

# flag dest -> configuration key
_CONFIG_FLAGS = {
    "grid": "grid",
    "levels": "levels",
    "offset": "offset",
    "k_sup": "k_sup",
    "k": "k_clusters",
    "classifier": "classifier",
    "threshold_mult": "threshold_multiplier",
    "root": "root_override",
    "train_frac": "train_fraction",
    "seed": "seed",
}


def _add_config_flags(p: argparse.ArgumentParser, *, features=False, learning=False):
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--seed", type=str, help="seed for every random choice (default 0)")
    if features:
        p.add_argument("--grid", help="block grid ROWSxCOLS (default 4x4)")
        p.add_argument("--levels", help="GLCM gray levels (default 8)")
        p.add_argument("--offset", help="GLCM offset 'dr,dc' (default 0,1)")
        p.add_argument("--k-sup", dest="k_sup", help="largest GMM order tried by BIC (default 3)")
    if learning:
        p.add_argument("--k", help="number of k-means clusters (default 8)")
        p.add_argument("--classifier", choices=["nb", "tan", "fan"], help="structure (default nb)")
        p.add_argument("--threshold-mult", dest="threshold_mult", help="FAN threshold as a multiple of I_avg (default 1.0)")
        p.add_argument("--root", help="TAN root attribute index (default 0)")
        p.add_argument("--train-frac", dest="train_frac", help="per-class training fraction (default 0.5)")


def _config(args, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_mapping(load_config_file(args.config), base=cfg)
    overrides = {
        key: getattr(args, dest)
        for dest, key in _CONFIG_FLAGS.items()
        if getattr(args, dest, None) is not None
    }
    return PipelineConfig.from_mapping(overrides, base=cfg)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError(f"expected cluster counts >= 2, got {text!r}")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or any(not v >= 0 for v in values):
        raise argparse.ArgumentTypeError(f"expected non-negative multipliers, got {text!r}")
    return values


def _kind_list(text: str) -> list[str]:
    kinds = [v.strip().lower() for v in text.split(",") if v.strip()]
    if not kinds or any(k not in ("nb", "tan", "fan") for k in kinds):
        raise argparse.ArgumentTypeError(f"expected classifiers from nb,tan,fan, got {text!r}")
    return kinds


def _write(path, text: str):
    pipeline._atomic_write(path, text)
    log.info("wrote %s", path)


def _load_table(path, cfg: PipelineConfig, jobs: int = 1) -> DescriptorTable:
    p = Path(path)
    if p.is_dir():
        return extract_directory(p, cfg, jobs=jobs)
    if not p.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    return DescriptorTable.read(p)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_extract(args) -> int:
    cfg = _config(args)
    table = extract_directory(args.data_dir, cfg, jobs=args.jobs)
    _write(args.out, table.to_csv())
    print(f"{table.n_images} images, {len(table.class_names)} classes -> {args.out}")
    return 0


def cmd_train(args) -> int:
    table = DescriptorTable.read(args.descriptors) if Path(args.descriptors).exists() else None
    if table is None:
        raise FileNotFoundError(f"{args.descriptors}: no such file")
    # grid and k_sup are properties of the table, not choices made here
    base = PipelineConfig(grid=table.grid, k_sup=table.k_sup)
    cfg = _config(args, base)
    model = train_model(table, cfg)
    _write(args.out, model.to_json())
    edges = len(model.structure.edges())
    print(
        f"{cfg.classifier.upper()} model: {model.n_attrs} attributes, {edges} attribute arcs, "
        f"k={cfg.k_clusters}, {len(model.train_paths)} train / {len(model.test_paths)} test -> {args.out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise FileNotFoundError(f"{args.model}: model file not found")
    model = TrainedModel.load(model_path)
    table = _load_table(args.data, model.config, jobs=args.jobs)
    if table.grid != model.config.grid or table.k_sup != model.config.k_sup:
        raise ConfigurationError(
            f"data has grid {table.grid}, k_sup={table.k_sup}; model expects "
            f"grid {model.config.grid}, k_sup={model.config.k_sup}"
        )
    reports = []
    if args.set in ("train", "both"):
        reports.append(evaluate_model(model, table, table.rows_for(model.train_paths), "training set"))
    if args.set in ("test", "both"):
        reports.append(evaluate_model(model, table, table.rows_for(model.test_paths), "test set"))
    if args.set == "all":
        reports.append(evaluate_model(model, table, None, "all images"))
    text = format_table(reports, model.class_names)
    text += "\n" + "\n".join(format_confusion(r, model.class_names) for r in reports)
    out = Path(args.out)
    _write(out.with_suffix(".txt"), text)
    _write(out.with_suffix(".csv"), reports_to_csv(reports, model.class_names))
    sys.stdout.write(format_table(reports, model.class_names))
    return 0


def cmd_sweep(args) -> int:
    probe = DescriptorTable.read(args.descriptors) if Path(args.descriptors).exists() else None
    if probe is None:
        raise FileNotFoundError(f"{args.descriptors}: no such file")
    cfg = _config(args, PipelineConfig(grid=probe.grid, k_sup=probe.k_sup))
    multipliers = args.threshold_mults if args.threshold_mults else [cfg.threshold_multiplier]
    groups = sweep_clusters(probe, args.k_values, cfg, args.classifiers, multipliers)
    _write(args.out, sweep_to_csv(groups))
    tables = []
    for g in groups:
        reports = [r for _, tr, te in g.results for r in (tr, te)]
        tables.append(format_table(reports, probe.class_names))
    text = "\n".join(tables)
    if args.report:
        _write(args.report, text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockbayes",
        description="Block-based image classification with NB, TAN and FAN Bayesian networks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute block descriptors for a directory of PGM images")
    p.add_argument("data_dir", help="directory with one subdirectory of PGM files per class")
    p.add_argument("--out", required=True, help="descriptor CSV to write")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    _add_config_flags(p, features=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit codebook, structure and parameters")
    p.add_argument("descriptors", help="descriptor CSV from 'extract'")
    p.add_argument("--out", required=True, help="model JSON to write")
    _add_config_flags(p, learning=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model")
    p.add_argument("model", help="model JSON from 'train'")
    p.add_argument("data", help="descriptor CSV or image directory")
    p.add_argument("--out", required=True, help="report path prefix; writes .txt and .csv")
    p.add_argument(
        "--set",
        choices=["train", "test", "both", "all"],
        default="both",
        help="which images to score: the model's split manifest or every image (default both)",
    )
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="accuracy versus cluster count and FAN threshold")
    p.add_argument("descriptors", help="descriptor CSV from 'extract'")
    p.add_argument("--k-values", dest="k_values", type=_int_list, default=[5, 8, 10, 15],
                   help="comma-separated cluster counts (default 5,8,10,15)")
    p.add_argument("--classifiers", type=_kind_list, default=["nb", "tan", "fan"],
                   help="comma-separated subset of nb,tan,fan")
    p.add_argument("--threshold-mults", dest="threshold_mults", type=_float_list, default=None,
                   help="comma-separated FAN threshold multipliers (default: the configured one)")
    p.add_argument("--out", required=True, help="sweep CSV to write")
    p.add_argument("--report", help="also write the text tables here")
    _add_config_flags(p, learning=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BlockBayesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
