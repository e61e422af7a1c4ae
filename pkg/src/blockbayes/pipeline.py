"""End-to-end pipeline: configuration, descriptor tables, training, persistence, sweeps."""

from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bayesnet
from .bayesnet import (
    ConditionalProbabilityTable,
    DiscreteDataset,
    NetworkStructure,
    build_structure,
    fit_parameters,
    mutual_info_matrix,
)
from .clustering import Codebook, assign_labels, image_descriptors, kmeans_fit
from .errors import BlockBayesError, ConfigurationError, DimensionError
from .evaluation import EvalReport, evaluate, stratified_split
from .features import FeatureConfig, descriptor_length, descriptor_names
from .imageio import BlockGrid, read_pgm

__all__ = [
    "PipelineConfig",
    "DescriptorTable",
    "TrainedModel",
    "SweepGroup",
    "load_config_file",
    "discover_images",
    "extract_directory",
    "train_model",
    "evaluate_model",
    "sweep_clusters",
    "sweep_to_csv",
]

MODEL_FORMAT = "blockbayes-model"
MODEL_VERSION = 1


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    grid: BlockGrid = field(default_factory=BlockGrid)
    levels: int = 8
    offset: tuple[int, int] = (0, 1)
    k_sup: int = 3
    tol: float = 1e-6
    max_iter: int = 200
    k_clusters: int = 8
    kmeans_max_iter: int = 100
    classifier: str = "nb"
    threshold_multiplier: float = 1.0
    root_override: Optional[int] = None
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classifier", self.classifier.lower())
        object.__setattr__(self, "offset", tuple(int(v) for v in self.offset))
        problems = []
        for name in ("levels", "k_sup", "max_iter", "k_clusters", "kmeans_max_iter"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.levels < 2:
            problems.append("levels must be >= 2")
        if self.k_clusters < 2:
            problems.append("k_clusters must be >= 2")
        if self.classifier not in bayesnet.KINDS:
            problems.append(f"classifier must be one of {', '.join(bayesnet.KINDS)}")
        if not self.threshold_multiplier >= 0:
            problems.append("threshold_multiplier must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            problems.append("train_fraction must lie strictly between 0 and 1")
        if self.offset == (0, 0):
            problems.append("offset must be nonzero")
        if problems:
            raise ConfigurationError("; ".join(problems))

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            grid=self.grid,
            levels=self.levels,
            offset=self.offset,
            k_sup=self.k_sup,
            seed=self.seed,
            tol=self.tol,
            max_iter=self.max_iter,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, BlockGrid):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_mapping(cls, values: dict, base: Optional["PipelineConfig"] = None) -> "PipelineConfig":
        """Build from string or typed values keyed by field name or alias."""
        base = base or cls()
        changes = {}
        for raw_key, raw in values.items():
            key = _ALIASES.get(raw_key.strip().lower().replace("-", "_"), None)
            if key is None:
                raise ConfigurationError(f"unknown configuration key {raw_key!r}")
            try:
                changes[key] = _PARSERS[key](raw) if isinstance(raw, str) else raw
            except (ValueError, BlockBayesError) as exc:
                raise ConfigurationError(f"bad value {raw!r} for {raw_key}: {exc}") from None
        if isinstance(changes.get("grid"), str):
            changes["grid"] = BlockGrid.parse(changes["grid"])
        return replace(base, **changes)


def _parse_offset(text: str) -> tuple[int, int]:
    parts = [p for p in re.split(r"[,\s]+", text.strip().strip("()")) if p]
    if len(parts) != 2:
        raise ValueError("offset must be two integers 'dr,dc'")
    return int(parts[0]), int(parts[1])


def _parse_root(text: str) -> Optional[int]:
    text = text.strip().lower()
    return None if text in ("", "none", "auto") else int(text)


_PARSERS = {
    "grid": BlockGrid.parse,
    "levels": int,
    "offset": _parse_offset,
    "k_sup": int,
    "tol": float,
    "max_iter": int,
    "k_clusters": int,
    "kmeans_max_iter": int,
    "classifier": str.strip,
    "threshold_multiplier": float,
    "root_override": _parse_root,
    "train_fraction": float,
    "seed": int,
}

_ALIASES = {name: name for name in _PARSERS}
_ALIASES.update(
    {
        "k": "k_clusters",
        "threshold_mult": "threshold_multiplier",
        "root": "root_override",
        "train_frac": "train_fraction",
    }
)


def load_config_file(path) -> dict:
    """Read flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# --------------------------------------------------------------------------
# Descriptor tables
# --------------------------------------------------------------------------

_COLUMN = re.compile(r"r(\d+)c(\d+)_(\w+)$")


@dataclass(frozen=True, eq=False)
class DescriptorTable:
    """Per-image block descriptors; ``descriptors`` is ``(n_images, n_blocks, D)``."""

    paths: tuple[str, ...]
    class_names: tuple[str, ...]
    classes: np.ndarray
    descriptors: np.ndarray
    grid: BlockGrid
    k_sup: int

    @property
    def n_images(self) -> int:
        return len(self.paths)

    def rows_for(self, paths: Sequence[str]) -> np.ndarray:
        index = {p: i for i, p in enumerate(self.paths)}
        missing = [p for p in paths if p not in index]
        if missing:
            raise ConfigurationError(f"{len(missing)} image(s) missing from table, e.g. {missing[0]}")
        return np.array([index[p] for p in paths], dtype=np.int64)

    def header(self) -> list[str]:
        names = descriptor_names(self.k_sup)
        cols = ["path", "class"]
        for r in range(self.grid.rows):
            for c in range(self.grid.cols):
                cols.extend(f"r{r}c{c}_{n}" for n in names)
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for path, cls, desc in zip(self.paths, self.classes, self.descriptors):
            writer.writerow([path, self.class_names[cls]] + [repr(float(v)) for v in desc.ravel()])
        return buf.getvalue()

    def write(self, path) -> None:
        _atomic_write(path, self.to_csv())

    @classmethod
    def read(cls, path) -> "DescriptorTable":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ConfigurationError(f"{path}: empty descriptor table")
        header, body = rows[0], rows[1:]
        if header[:2] != ["path", "class"] or len(header) < 3:
            raise ConfigurationError(f"{path}: not a descriptor table (bad header)")
        cells = [_COLUMN.match(h) for h in header[2:]]
        if not all(cells):
            raise ConfigurationError(f"{path}: unrecognised descriptor column names")
        n_rows = 1 + max(int(m.group(1)) for m in cells)
        n_cols = 1 + max(int(m.group(2)) for m in cells)
        k_sup = sum(1 for m in cells if m.group(1) == "0" and m.group(2) == "0" and m.group(3).startswith("w"))
        grid = BlockGrid(n_rows, n_cols)
        d = descriptor_length(k_sup)
        if len(header) - 2 != grid.n_blocks * d:
            raise ConfigurationError(f"{path}: column count does not match a {grid} grid with k_sup={k_sup}")
        if not body:
            raise ConfigurationError(f"{path}: descriptor table has no rows")
        names = sorted({row[1] for row in body})
        lookup = {n: i for i, n in enumerate(names)}
        try:
            values = np.array([[float(v) for v in row[2:]] for row in body], dtype=np.float64)
        except ValueError as exc:
            raise ConfigurationError(f"{path}: non-numeric descriptor value ({exc})") from None
        if values.shape[1] != grid.n_blocks * d:
            raise ConfigurationError(f"{path}: ragged rows")
        return cls(
            paths=tuple(row[0] for row in body),
            class_names=tuple(names),
            classes=np.array([lookup[row[1]] for row in body], dtype=np.int64),
            descriptors=values.reshape(len(body), grid.n_blocks, d),
            grid=grid,
            k_sup=k_sup,
        )


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


PGM_SUFFIXES = (".pgm", ".pnm")


def discover_images(data_dir) -> list[tuple[str, str]]:
    """``(relative path, class name)`` for every PGM under a class subdirectory.

    Sorted lexicographically by relative POSIX path.
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise ConfigurationError(f"{data_dir}: not a directory")
    found = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in class_dir.rglob("*"):
            if f.is_file() and f.suffix.lower() in PGM_SUFFIXES:
                found.append((f.relative_to(root).as_posix(), class_dir.name))
    found.sort()
    if not found:
        raise ConfigurationError(f"no images found under {data_dir}")
    return found


def _describe(args):
    path, cfg = args
    try:
        return image_descriptors(read_pgm(path), cfg)
    except (OSError, BlockBayesError) as exc:
        raise BlockBayesError(f"{path}: {exc}") from exc


def extract_directory(data_dir, cfg: PipelineConfig, jobs: int = 1) -> DescriptorTable:
    images = discover_images(data_dir)
    fcfg = cfg.feature_config()
    tasks = [(Path(data_dir) / rel, fcfg) for rel, _ in images]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            descriptors = list(pool.map(_describe, tasks))
    else:
        descriptors = [_describe(t) for t in tasks]
    names = sorted({cls for _, cls in images})
    lookup = {n: i for i, n in enumerate(names)}
    return DescriptorTable(
        paths=tuple(rel for rel, _ in images),
        class_names=tuple(names),
        classes=np.array([lookup[cls] for _, cls in images], dtype=np.int64),
        descriptors=np.stack(descriptors),
        grid=cfg.grid,
        k_sup=cfg.k_sup,
    )


# --------------------------------------------------------------------------
# Training and persistence
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: PipelineConfig
    class_names: tuple[str, ...]
    codebook: Codebook
    structure: NetworkStructure
    cpt: ConditionalProbabilityTable
    train_paths: tuple[str, ...] = ()
    test_paths: tuple[str, ...] = ()

    @property
    def n_attrs(self) -> int:
        return self.structure.n_attrs

    def label_values(self, descriptors) -> np.ndarray:
        """0-based attribute codes for ``(n_images, n_blocks, D)`` descriptors."""
        descriptors = np.asarray(descriptors, dtype=np.float64)
        if descriptors.ndim != 3 or descriptors.shape[1] != self.n_attrs:
            raise DimensionError(
                f"expected descriptors shaped (n, {self.n_attrs}, {self.codebook.dim}), "
                f"got {descriptors.shape}"
            )
        n, b, d = descriptors.shape
        return (assign_labels(descriptors.reshape(n * b, d), self.codebook) - 1).reshape(n, b)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "class_names": list(self.class_names),
            "class_count": self.cpt.class_count,
            "cardinalities": [int(t.shape[0]) for t in self.cpt.tables],
            "kind": self.structure.kind,
            "attr_parent": {
                str(child): parent
                for child, parent in enumerate(self.structure.attr_parent)
                if parent is not None
            },
            "root": self.structure.root,
            "prior": self.cpt.prior.tolist(),
            "tables": [t.tolist() for t in self.cpt.tables],
            "codebook": self.codebook.to_dict(),
            "split": {"train": list(self.train_paths), "test": list(self.test_paths)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        _atomic_write(path, self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ConfigurationError("not a blockbayes model file")
        if d.get("version") != MODEL_VERSION:
            raise ConfigurationError(f"unsupported model version {d.get('version')!r}")
        n = len(d["cardinalities"])
        parents = [None] * n
        for child, parent in d["attr_parent"].items():
            parents[int(child)] = int(parent)
        return cls(
            config=PipelineConfig.from_mapping(d["config"]),
            class_names=tuple(d["class_names"]),
            codebook=Codebook.from_dict(d["codebook"]),
            structure=NetworkStructure(d["kind"], tuple(parents), d["root"]),
            cpt=ConditionalProbabilityTable(
                prior=np.asarray(d["prior"], dtype=np.float64),
                tables=tuple(np.asarray(t, dtype=np.float64) for t in d["tables"]),
            ),
            train_paths=tuple(d["split"]["train"]),
            test_paths=tuple(d["split"]["test"]),
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigurationError(f"{path}: malformed model file ({exc})") from None


def _check_table(table: DescriptorTable, cfg: PipelineConfig):
    if table.grid != cfg.grid or table.k_sup != cfg.k_sup:
        raise ConfigurationError(
            f"descriptor table was extracted with grid {table.grid}, k_sup={table.k_sup}; "
            f"configuration says grid {cfg.grid}, k_sup={cfg.k_sup}"
        )


def _fit_codebook(table: DescriptorTable, train: np.ndarray, k: int, cfg: PipelineConfig):
    d = table.descriptors.shape[2]
    pooled = table.descriptors[train].reshape(-1, d)
    codebook = kmeans_fit(pooled, k, seed=cfg.seed, max_iter=cfg.kmeans_max_iter)
    n, b, _ = table.descriptors.shape
    values = (assign_labels(table.descriptors.reshape(n * b, d), codebook) - 1).reshape(n, b)
    return codebook, values


def _dataset(values, classes, k, class_count) -> DiscreteDataset:
    return DiscreteDataset(values, classes, (k,) * values.shape[1], class_count)


def train_model(table: DescriptorTable, cfg: PipelineConfig) -> TrainedModel:
    """Split, fit the codebook on training images, learn structure and parameters."""
    _check_table(table, cfg)
    train, test = stratified_split(table.classes, cfg.train_fraction, cfg.seed)
    codebook, values = _fit_codebook(table, train, cfg.k_clusters, cfg)
    ds = _dataset(values[train], table.classes[train], cfg.k_clusters, len(table.class_names))
    structure = build_structure(
        ds, cfg.classifier, cfg.threshold_multiplier, cfg.root_override
    )
    return TrainedModel(
        config=cfg,
        class_names=table.class_names,
        codebook=codebook,
        structure=structure,
        cpt=fit_parameters(ds, structure),
        train_paths=tuple(table.paths[i] for i in train),
        test_paths=tuple(table.paths[i] for i in test),
    )


def evaluate_model(
    model: TrainedModel, table: DescriptorTable, rows=None, set_name: str = "test set"
) -> EvalReport:
    """Evaluate on ``rows`` of ``table`` (all rows when omitted)."""
    if tuple(table.class_names) != tuple(model.class_names):
        unknown = set(table.class_names) - set(model.class_names)
        if unknown:
            raise ConfigurationError(f"classes unknown to the model: {sorted(unknown)}")
    remap = np.array([model.class_names.index(n) for n in table.class_names], dtype=np.int64)
    rows = np.arange(table.n_images) if rows is None else np.asarray(rows, dtype=np.int64)
    try:
        values = model.label_values(table.descriptors[rows])
    except DimensionError as exc:
        raise ConfigurationError(str(exc)) from None
    return evaluate(
        model.cpt,
        model.structure,
        values,
        remap[table.classes[rows]],
        set_name=set_name,
        k_clusters=model.codebook.k,
        split_seed=model.config.seed,
        threshold_multiplier=model.config.threshold_multiplier,
    )


# --------------------------------------------------------------------------
# Cluster-count sweep
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGroup:
    k: int
    # (classifier label, training-set report, test-set report)
    results: tuple[tuple[str, EvalReport, EvalReport], ...]


def _classifier_grid(classifiers, multipliers):
    grid = []
    for kind in classifiers:
        kind = kind.lower()
        if kind not in bayesnet.KINDS:
            raise ConfigurationError(f"unknown classifier {kind!r}")
        if kind == "fan":
            grid.extend(("fan", float(m)) for m in multipliers)
        else:
            grid.append((kind, None))
    return grid


def sweep_clusters(
    table: DescriptorTable,
    k_values: Sequence[int],
    cfg: PipelineConfig,
    classifiers: Sequence[str] = bayesnet.KINDS,
    multipliers: Optional[Sequence[float]] = None,
) -> list[SweepGroup]:
    """Rerun clustering, structure and parameter learning for each ``k``.

    The split and seed are shared by every cell, so a single-cell sweep
    reproduces :func:`train_model` followed by :func:`evaluate_model`.
    """
    if not k_values:
        raise ConfigurationError("k_values must not be empty")
    _check_table(table, cfg)
    multipliers = [cfg.threshold_multiplier] if multipliers is None else list(multipliers)
    cells = _classifier_grid(classifiers, multipliers)
    train, test = stratified_split(table.classes, cfg.train_fraction, cfg.seed)
    groups = []
    for k in k_values:
        _, values = _fit_codebook(table, train, int(k), cfg)
        ds = _dataset(values[train], table.classes[train], int(k), len(table.class_names))
        mi = mutual_info_matrix(ds) if ds.n_attrs > 1 else None
        results = []
        for kind, mult in cells:
            structure = build_structure(
                ds, kind, 1.0 if mult is None else mult, cfg.root_override, mi=mi
            )
            cpt = fit_parameters(ds, structure)
            reports = [
                evaluate(
                    cpt,
                    structure,
                    values[rows],
                    table.classes[rows],
                    set_name=name,
                    k_clusters=int(k),
                    split_seed=cfg.seed,
                    threshold_multiplier=mult,
                )
                for rows, name in ((train, "training set"), (test, "test set"))
            ]
            label = kind if mult is None else f"fan@{mult:g}"
            results.append((label, reports[0], reports[1]))
        groups.append(SweepGroup(k=int(k), results=tuple(results)))
    return groups


def sweep_to_csv(groups: Sequence[SweepGroup]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["k", "classifier", "threshold_multiplier", "train_mean", "test_mean", "train_pcc", "test_pcc"]
    )
    for g in groups:
        for label, tr, te in g.results:
            mult = "" if te.threshold_multiplier is None else repr(float(te.threshold_multiplier))
            writer.writerow(
                [g.k, label, mult, repr(tr.mean_classification), repr(te.mean_classification),
                 repr(tr.pcc), repr(te.pcc)]
            )
    return buf.getvalue()


def best_fan(group: SweepGroup) -> Optional[tuple[str, EvalReport]]:
    """FAN cell with the highest mean test accuracy (first one on ties)."""
    best = None
    for label, _, te in group.results:
        if label.startswith("fan") and (best is None or te.mean_classification > best[1].mean_classification):
            best = (label, te)
    return best
