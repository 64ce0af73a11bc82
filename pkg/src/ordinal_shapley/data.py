"""Tabular ingestion, train/assessment/held-out splits and label noise."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .exact import Partition

log = logging.getLogger(__name__)

PRESETS = ("wine", "cancer", "adult")
DATA_DIR_ENV = "ORDSHAP_DATA_DIR"
COLUMN_KINDS = ("numeric", "categorical", "target", "ignore")


class DataError(ValueError):
    pass


@dataclass
class DatasetSchema:
    columns: list[dict[str, str]]
    target: str
    delimiter: str = ","
    header: bool = False
    missing_token: str = "?"
    target_strip: str = ""

    def __post_init__(self):
        names = [c["name"] for c in self.columns]
        for c in self.columns:
            if c.get("kind") not in COLUMN_KINDS:
                raise DataError(f"column {c.get('name')!r} has unknown kind {c.get('kind')!r}")
        targets = [c["name"] for c in self.columns if c["kind"] == "target"]
        if targets != [self.target] or self.target not in names:
            raise DataError("schema needs exactly one target column, named by 'target'")

    @classmethod
    def from_json(cls, doc: Mapping[str, Any] | str | Path) -> "DatasetSchema":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        return cls(columns=[dict(c) for c in doc["columns"]], target=doc["target"],
                   delimiter=doc.get("delimiter", ","), header=bool(doc.get("header", False)),
                   missing_token=doc.get("missing_token", "?"),
                   target_strip=doc.get("target_strip", ""))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    class_names: list[str]
    rejected: list[tuple[int, str]] = field(default_factory=list)
    source: str = ""

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_names,
                       source=self.source)


class TabularEncoder:
    """Numeric passthrough plus one-hot categoricals in first-occurrence order."""

    def __init__(self, schema: DatasetSchema):
        self.schema = schema
        self.categories: dict[str, list[str]] = {}

    def fit(self, rows: Sequence[Mapping[str, str]]) -> "TabularEncoder":
        for col in self.schema.columns:
            if col["kind"] == "categorical":
                seen: dict[str, None] = {}
                for row in rows:
                    seen.setdefault(row[col["name"]], None)
                self.categories[col["name"]] = list(seen)
        return self

    @property
    def feature_names(self) -> list[str]:
        names = []
        for col in self.schema.columns:
            if col["kind"] == "numeric":
                names.append(col["name"])
            elif col["kind"] == "categorical":
                names.extend(f"{col['name']}={v}" for v in self.categories[col["name"]])
        return names

    def transform_row(self, row: Mapping[str, str]) -> list[float]:
        out: list[float] = []
        for col in self.schema.columns:
            kind, name = col["kind"], col["name"]
            if kind == "numeric":
                out.append(float(row[name]))
            elif kind == "categorical":
                cats = self.categories[name]
                onehot = [0.0] * len(cats)
                if row[name] in cats:  # unseen levels stay all-zero
                    onehot[cats.index(row[name])] = 1.0
                out.extend(onehot)
        return out


def _class_order(labels: Sequence[str]) -> list[str]:
    uniq = list(dict.fromkeys(labels))
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return sorted(uniq)


def load_tabular(path: str | Path, schema: DatasetSchema) -> Dataset:
    """Parse a delimited file under ``schema``.

    Rows with the wrong field count, a missing token, or an unparsable number
    are skipped and listed in ``Dataset.rejected`` with their line numbers.
    Features are not standardized here; see :func:`split`.
    """
    path = Path(path)
    names = [c["name"] for c in schema.columns]
    numeric = [c["name"] for c in schema.columns if c["kind"] == "numeric"]
    rows: list[tuple[int, dict[str, str]]] = []
    rejected: list[tuple[int, str]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter, skipinitialspace=True)
        for lineno, fields in enumerate(reader, start=1):
            if schema.header and lineno == 1:
                continue
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(names):
                rejected.append((lineno, f"expected {len(names)} fields, got {len(fields)}"))
                continue
            row = {k: v.strip() for k, v in zip(names, fields)}
            missing = [k for k, v in row.items() if v == schema.missing_token]
            if missing:
                rejected.append((lineno, f"missing value in {', '.join(missing)}"))
                continue
            bad = []
            for k in numeric:
                try:
                    float(row[k])
                except ValueError:
                    bad.append(k)
            if bad:
                rejected.append((lineno, f"non-numeric value in {', '.join(bad)}"))
                continue
            if schema.target_strip:
                row[schema.target] = row[schema.target].rstrip(schema.target_strip)
            rows.append((lineno, row))
    if rejected:
        log.warning("%s: rejected %d malformed rows (first at line %d: %s)",
                    path.name, len(rejected), rejected[0][0], rejected[0][1])
    if not rows:
        raise DataError(f"{path}: no usable rows")
    encoder = TabularEncoder(schema).fit([r for _, r in rows])
    X = np.array([encoder.transform_row(r) for _, r in rows], dtype=float)
    labels = [r[schema.target] for _, r in rows]
    classes = _class_order(labels)
    lookup = {c: k for k, c in enumerate(classes)}
    y = np.array([lookup[v] for v in labels], dtype=np.int64)
    return Dataset(X, y, encoder.feature_names, classes, rejected, source=str(path))


# ---------------------------------------------------------------------------
# presets


def preset_document(name: str) -> dict[str, Any]:
    if name not in PRESETS:
        raise DataError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("ordinal_shapley").joinpath(f"presets/{name}.json").read_text()
    return json.loads(text)


@dataclass
class SplitSpec:
    valued_count: int
    assessment_count: int
    heldout_count: int | None = None  # None: everything that is left
    seed: int = 0

    @classmethod
    def for_preset(cls, name: str, seed: int = 0) -> "SplitSpec":
        doc = preset_document(name)["split"]
        return cls(doc["valued_count"], doc["assessment_count"], doc["heldout_count"], seed)


def _surrogate_wine(seed: int = 0) -> Dataset:
    """Gaussian three-class stand-in with the Wine table's shape (178 x 13)."""
    rng = np.random.default_rng(seed)
    sizes = (59, 71, 48)
    centers = rng.normal(0.0, 1.2, size=(3, 13))
    X = np.vstack([rng.normal(centers[c], 1.0, size=(s, 13)) for c, s in enumerate(sizes)])
    y = np.repeat(np.arange(3), sizes)
    return Dataset(X, y, [f"x{k}" for k in range(13)], ["1", "2", "3"], source="surrogate")


def load_preset(name: str, path: str | Path | None = None, *,
                allow_surrogate: bool = True) -> Dataset:
    """Load a named dataset from ``path`` or ``$ORDSHAP_DATA_DIR``.

    Without a file, ``wine`` falls back to the copy bundled with scikit-learn
    and then to a synthetic surrogate of the same shape.
    """
    doc = preset_document(name)
    schema = DatasetSchema.from_json(doc)
    if path is None and os.environ.get(DATA_DIR_ENV):
        candidate = Path(os.environ[DATA_DIR_ENV]) / doc["default_file"]
        if candidate.exists():
            path = candidate
    if path is not None:
        return load_tabular(path, schema)
    if name != "wine":
        raise FileNotFoundError(f"preset {name!r} needs a data file ({doc['default_file']}); "
                                f"pass a path or set {DATA_DIR_ENV}")
    try:
        from sklearn.datasets import load_wine
    except ImportError:
        if not allow_surrogate:
            raise FileNotFoundError("no Wine file and scikit-learn is not installed") from None
        log.warning("Wine table unavailable; using a synthetic surrogate")
        return _surrogate_wine()
    bunch = load_wine()
    names = [str(n) for n in bunch.feature_names]
    return Dataset(np.asarray(bunch.data, float), np.asarray(bunch.target, np.int64),
                   names, ["1", "2", "3"], source="sklearn:wine")


# ---------------------------------------------------------------------------
# splitting, noise, classes


@dataclass
class Split:
    valued: Dataset
    assessment: Dataset
    heldout: Dataset
    mean: np.ndarray
    scale: np.ndarray


def split(dataset: Dataset, spec: SplitSpec, standardize: bool = True) -> Split:
    """Seeded shuffle then contiguous valued / assessment / held-out slices.

    Rows are put in a canonical order first, so the result does not depend
    on the order of rows in the input file.  Standardization statistics come
    from the valued and assessment slices only.
    """
    m = len(dataset)
    held = m - spec.valued_count - spec.assessment_count if spec.heldout_count is None \
        else spec.heldout_count
    if min(spec.valued_count, spec.assessment_count) < 1 or held < 1:
        raise DataError("every slice needs at least one row")
    if spec.valued_count + spec.assessment_count + held > m:
        raise DataError(f"split asks for {spec.valued_count + spec.assessment_count + held} "
                        f"rows but the dataset has {m}")
    canon = np.lexsort(np.column_stack([dataset.X, dataset.y]).T[::-1])
    order = canon[np.random.default_rng(spec.seed).permutation(m)]
    a, b = spec.valued_count, spec.valued_count + spec.assessment_count
    parts = [dataset.subset(order[:a]), dataset.subset(order[a:b]),
             dataset.subset(order[b:b + held])]
    fit_rows = np.vstack([parts[0].X, parts[1].X])
    mean = fit_rows.mean(axis=0) if standardize else np.zeros(dataset.X.shape[1])
    scale = fit_rows.std(axis=0) if standardize else np.ones(dataset.X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    for part in parts:
        part.X = (part.X - mean) / scale
    return Split(*parts, mean=mean, scale=scale)


@dataclass
class NoiseMask:
    flipped: np.ndarray
    fraction: float
    seed: int
    original: np.ndarray

    @property
    def count(self) -> int:
        return int(self.flipped.sum())


def inject_label_noise(y: np.ndarray, fraction: float, seed: int,
                       n_classes: int | None = None) -> tuple[np.ndarray, NoiseMask]:
    """Relabel ``floor(fraction * len(y))`` random points to a different class."""
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    if n_classes < 2:
        raise ValueError("label noise needs at least two classes")
    rng = np.random.default_rng(seed)
    count = math.floor(round(fraction * len(y), 9))
    picked = rng.choice(len(y), size=count, replace=False)
    noisy = y.copy()
    for idx in np.sort(picked):
        shift = int(rng.integers(1, n_classes))
        noisy[idx] = (y[idx] + shift) % n_classes
    flipped = np.zeros(len(y), dtype=bool)
    flipped[picked] = True
    return noisy, NoiseMask(flipped, fraction, seed, y.copy())


def class_partition(labels: Sequence[int]) -> Partition:
    """One union per observed label, unions ordered by label."""
    labels = np.asarray(labels)
    return Partition([np.flatnonzero(labels == lab) for lab in np.unique(labels)])
