"""Ingestion and preprocessing of per-node tabular datasets.

The raw CSV holds one hospital encounter per row: a readmission-count
category, two binary fields, nine numeric clinical measurements, a set of
binary condition flags, the integer length-of-stay label, and a facility id
that assigns the row to a node. Engineered feature rows use a fixed
19-column layout:

    [0..5]   one-hot readmission count ("0".."4", "5+")
    [6]      gender (M=1, F=0)
    [7]      hemo flag
    [8..16]  hematocrit, neutrophils, sodium, glucose, bloodureanitro,
             creatinine, bmi, pulse, respiration
    [17]     n_conditions (sum of the binary condition flags)
    [18]     intercept, constant 1

Only columns 8..16 are z-scored; the intercept column exists because labels
are unnormalized positive integers and the linear model has no other bias
term.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConstantFeatureError,
    DegenerateInputError,
    EmptyInputError,
    ParameterError,
    SchemaError,
    SplitError,
)

RCOUNT_CATEGORIES = ("0", "1", "2", "3", "4", "5+")

NUMERIC_FIELDS = (
    "hematocrit",
    "neutrophils",
    "sodium",
    "glucose",
    "bloodureanitro",
    "creatinine",
    "bmi",
    "pulse",
    "respiration",
)

# Logical field names load_csv expects to find (via the schema's column map).
LOGICAL_FIELDS = ("rcount", "gender", "hemo") + NUMERIC_FIELDS + ("lengthofstay", "facid")

# Binary condition columns summed into n_conditions. The set is configurable
# (CsvSchema.condition_columns); this default covers the public length-of-stay
# dataset's condition flags other than gender and hemo.
DEFAULT_CONDITION_COLUMNS = (
    "dialysisrenalendstage",
    "asthma",
    "irondef",
    "pneum",
    "substancedependence",
    "psychologicaldisordermajor",
    "depress",
    "psychother",
    "fibrosisandother",
    "malnutrition",
)

FEATURE_NAMES = (
    tuple(f"rcount_{c}" for c in ("0", "1", "2", "3", "4", "5plus"))
    + ("gender", "hemo")
    + NUMERIC_FIELDS
    + ("n_conditions", "intercept")
)
FEATURE_DIM = len(FEATURE_NAMES)  # 19

# Column indices of the nine z-scored clinical measurements.
NUMERIC_COLUMNS = np.arange(8, 17)


@dataclass(frozen=True, slots=True)
class RawRecord:
    """One validated row of the raw CSV."""

    rcount: str
    gender: str
    hemo: int
    hematocrit: float
    neutrophils: float
    sodium: float
    glucose: float
    bloodureanitro: float
    creatinine: float
    bmi: float
    pulse: float
    respiration: float
    condition_flags: tuple[int, ...]
    lengthofstay: int
    facid: str


@dataclass(frozen=True)
class CsvSchema:
    """Maps logical field names to physical CSV column names.

    ``columns`` overrides individual logical names (defaults to identity);
    ``condition_columns`` lists the physical binary columns summed into
    n_conditions.
    """

    columns: Mapping[str, str] = field(default_factory=dict)
    condition_columns: tuple[str, ...] = DEFAULT_CONDITION_COLUMNS

    def __post_init__(self):
        unknown = set(self.columns) - set(LOGICAL_FIELDS)
        if unknown:
            raise SchemaError(f"unknown logical field(s) in column map: {sorted(unknown)}")
        if not self.condition_columns:
            raise SchemaError("condition_columns must name at least one column")

    def physical(self, logical: str) -> str:
        return self.columns.get(logical, logical)

    def required_physical_columns(self) -> list[str]:
        return [self.physical(f) for f in LOGICAL_FIELDS] + list(self.condition_columns)


@dataclass
class LocalDataset:
    """One node's engineered data with train/val/test splits.

    ``numeric_columns`` lists the feature columns subject to z-scoring;
    ``feature_stats`` holds the training-split (means, stds) once
    :func:`normalize` has run.
    """

    node_id: int
    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    numeric_columns: np.ndarray
    feature_names: tuple[str, ...] | None = None
    feature_stats: tuple[np.ndarray, np.ndarray] | None = None
    source_label: str | None = None

    @property
    def feature_dim(self) -> int:
        return self.train[0].shape[1]

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name not in ("train", "val", "test"):
            raise ParameterError(f"unknown split {name!r}")
        return getattr(self, name)


def _parse_flag(text: str) -> int:
    v = float(text)
    if v == 0.0:
        return 0
    if v == 1.0:
        return 1
    raise ValueError(f"not a binary flag: {text!r}")


def _required(row: Mapping[str, str | None], column: str) -> str:
    value = row.get(column)
    if value is None:
        raise ValueError(f"missing {column}")
    value = value.strip()
    if not value:
        raise ValueError(f"empty {column}")
    return value


def _parse_record(row: Mapping[str, str | None], schema: CsvSchema) -> RawRecord | None:
    """Parse one CSV row; None if any required field is missing or malformed."""
    try:
        rcount = _required(row, schema.physical("rcount"))
        if rcount not in RCOUNT_CATEGORIES:
            return None
        gender = _required(row, schema.physical("gender")).upper()
        if gender not in ("M", "F"):
            return None
        hemo = _parse_flag(_required(row, schema.physical("hemo")))
        numerics = []
        for name in NUMERIC_FIELDS:
            v = float(_required(row, schema.physical(name)))
            if not math.isfinite(v):
                return None
            numerics.append(v)
        flags = tuple(_parse_flag(_required(row, c)) for c in schema.condition_columns)
        los = float(_required(row, schema.physical("lengthofstay")))
        if not los.is_integer() or los < 1:
            return None
        facid = _required(row, schema.physical("facid"))
    except ValueError:
        return None
    return RawRecord(rcount, gender, hemo, *numerics, flags, int(los), facid)


def load_csv(path, schema: CsvSchema | None = None) -> tuple[dict[str, list[RawRecord]], int]:
    """Read the raw CSV and group the parseable records by facility id.

    Returns ``(groups, dropped)`` where ``groups`` maps each distinct
    facility id, in sorted order, to its records, and ``dropped`` counts the
    rows discarded because a required field was missing or unparseable.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    groups: dict[str, list[RawRecord]] = {}
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in schema.required_physical_columns():
            if column not in header:
                raise SchemaError(f"required column {column!r} missing from header of {path}")
        for row in reader:
            record = _parse_record(row, schema)
            if record is None:
                dropped += 1
            else:
                groups.setdefault(record.facid, []).append(record)
    if not groups:
        raise EmptyInputError(f"no parseable data rows in {path}")
    return {facid: groups[facid] for facid in sorted(groups)}, dropped


def engineer_features(records: Sequence[RawRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Build the unnormalized feature matrix and label vector for one node.

    Row layout follows :data:`FEATURE_NAMES`; labels are the raw
    length-of-stay values as floats.
    """
    X = np.zeros((len(records), FEATURE_DIM))
    y = np.empty(len(records))
    for r, rec in enumerate(records):
        X[r, RCOUNT_CATEGORIES.index(rec.rcount)] = 1.0
        X[r, 6] = 1.0 if rec.gender == "M" else 0.0
        X[r, 7] = rec.hemo
        X[r, 8:17] = (
            rec.hematocrit,
            rec.neutrophils,
            rec.sodium,
            rec.glucose,
            rec.bloodureanitro,
            rec.creatinine,
            rec.bmi,
            rec.pulse,
            rec.respiration,
        )
        X[r, 17] = sum(rec.condition_flags)
        X[r, 18] = 1.0
        y[r] = rec.lengthofstay
    return X, y


def split_dataset(rows, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic 70/15/15 split of row indices.

    The permutation is ``np.random.default_rng(seed).permutation(m)``, i.e. a
    Fisher-Yates shuffle driven by PCG64, so identical inputs and seed give
    identical splits across runs and platforms. Sizes use integer arithmetic:
    train = floor(0.70 m); the held-out remainder is halved with the odd row
    going to test (val = floor(rest/2)). The three sets always partition
    range(m).

    ``rows`` may be the row count itself or any sized sequence.
    """
    m = int(rows) if isinstance(rows, (int, np.integer)) else len(rows)
    if m < 3:
        raise SplitError(f"need at least 3 rows to split, got {m}")
    perm = np.random.default_rng(seed).permutation(m)
    n_train = (7 * m) // 10
    n_val = (m - n_train) // 2
    return (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val :],
    )


def normalize(dataset: LocalDataset) -> LocalDataset:
    """Z-score the numeric columns using training-split statistics.

    Uses the population standard deviation (divide by m), so a normalized
    training column has mean 0 and std exactly 1. Validation and test reuse
    the training statistics; labels and non-numeric columns pass through.
    Returns a new dataset; the input is not modified.
    """
    X_train, _ = dataset.train
    if X_train.shape[0] == 0:
        raise DegenerateInputError("cannot normalize an empty training split")
    cols = np.asarray(dataset.numeric_columns, dtype=int)
    means = X_train[:, cols].mean(axis=0)
    stds = X_train[:, cols].std(axis=0)
    for col, std in zip(cols, stds):
        if std == 0.0:
            name = dataset.feature_names[col] if dataset.feature_names else f"column {col}"
            raise ConstantFeatureError(
                f"feature {name!r} is constant on the training split of node {dataset.node_id}"
            )

    def rescale(split):
        X, y = split
        X = X.copy()
        if X.shape[0]:
            X[:, cols] = (X[:, cols] - means) / stds
        return X, y

    return replace(
        dataset,
        train=rescale(dataset.train),
        val=rescale(dataset.val),
        test=rescale(dataset.test),
        feature_stats=(means, stds),
    )


def load_preprocessed(path, schema: CsvSchema | None = None, seed: int = 42) -> tuple[list[LocalDataset], int]:
    """Full pipeline: load_csv -> engineer_features -> split -> normalize.

    Nodes are numbered 1..n by sorted facility id. Every node is split with
    the same seed. Returns ``(datasets, dropped_row_count)``.
    """
    groups, dropped = load_csv(path, schema)
    datasets = []
    for node_id, (facid, records) in enumerate(groups.items(), start=1):
        X, y = engineer_features(records)
        tr, va, te = split_dataset(len(records), seed)
        dataset = LocalDataset(
            node_id=node_id,
            train=(X[tr], y[tr]),
            val=(X[va], y[va]),
            test=(X[te], y[te]),
            numeric_columns=NUMERIC_COLUMNS.copy(),
            feature_names=FEATURE_NAMES,
            source_label=facid,
        )
        datasets.append(normalize(dataset))
    return datasets, dropped


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for deterministic multi-node regression data.

    ``feature_dim`` counts the trailing intercept column. Each node draws
    ``rows_per_node[i]`` feature rows i.i.d. standard normal, appends the
    intercept, and labels them with its cluster's weight vector plus
    N(0, noise_std^2) noise.
    """

    node_count: int
    rows_per_node: tuple[int, ...]
    feature_dim: int
    cluster_assignment: tuple[int, ...]
    cluster_weights: tuple[tuple[float, ...], ...]
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ParameterError("node_count must be >= 1")
        if len(self.rows_per_node) != self.node_count:
            raise ParameterError(
                f"rows_per_node has {len(self.rows_per_node)} entries for "
                f"{self.node_count} nodes"
            )
        if self.feature_dim < 1:
            raise ParameterError("feature_dim must be >= 1")
        if any(m < self.feature_dim for m in self.rows_per_node):
            raise ParameterError(
                "every node needs at least feature_dim rows for a well-posed fit"
            )
        if len(self.cluster_assignment) != self.node_count:
            raise ParameterError("cluster_assignment must list one cluster per node")
        n_clusters = len(self.cluster_weights)
        if any(not 0 <= c < n_clusters for c in self.cluster_assignment):
            raise ParameterError("cluster_assignment references a missing cluster")
        if any(len(w) != self.feature_dim for w in self.cluster_weights):
            raise ParameterError("every cluster weight vector must have feature_dim entries")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be non-negative")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")


def generate_synthetic(spec: SyntheticSpec) -> list[LocalDataset]:
    """Generate one LocalDataset per node according to ``spec``.

    Deterministic: node i draws from a stream seeded by (spec.seed, i) and is
    split with spec.seed. Features are left unnormalized (they are already
    standard normal by construction); apply :func:`normalize` if needed.
    """
    datasets = []
    names = tuple(f"f{j}" for j in range(spec.feature_dim - 1)) + ("intercept",)
    for node in range(spec.node_count):
        m = spec.rows_per_node[node]
        rng = np.random.default_rng([spec.seed, node])
        X = np.hstack([rng.standard_normal((m, spec.feature_dim - 1)), np.ones((m, 1))])
        w = np.asarray(spec.cluster_weights[spec.cluster_assignment[node]], dtype=float)
        y = X @ w
        if spec.noise_std > 0:
            y = y + spec.noise_std * rng.standard_normal(m)
        tr, va, te = split_dataset(m, spec.seed)
        datasets.append(
            LocalDataset(
                node_id=node + 1,
                train=(X[tr], y[tr]),
                val=(X[va], y[va]),
                test=(X[te], y[te]),
                numeric_columns=np.arange(spec.feature_dim - 1),
                feature_names=names,
            )
        )
    return datasets


def dump_preprocessed(datasets: Sequence[LocalDataset], out_dir) -> list[Path]:
    """Write each node's splits as audit CSVs (feature layout plus label)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for ds in datasets:
        names = ds.feature_names or tuple(f"f{j}" for j in range(ds.feature_dim))
        for split_name in ("train", "val", "test"):
            X, y = ds.split(split_name)
            path = out / f"node{ds.node_id}_{split_name}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(list(names) + ["label"])
                for row, label in zip(X, y):
                    writer.writerow([f"{v:.17g}" for v in row] + [f"{label:.17g}"])
            written.append(path)
    return written
