"""Cohort data model: CSV ingestion, one-hot encoding, normalization, stratified splits.

A cohort is an immutable list of patient records, each holding a covariate
vector, a binary treatment flag, and a binary outcome flag. Categorical
input columns are one-hot encoded at load time; continuous columns can be
standardized with statistics that are kept on the cohort so external data
can be transformed with the training statistics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .errors import BadValue, DegenerateCohort, EmptyStratum, MissingColumn

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class CovariateColumn:
    """One raw input column; categorical columns are expanded on load.

    ``categories`` pins the one-hot layout (needed when a second file must
    encode into the training cohort's feature space). When None, categories
    are collected from the data and sorted lexicographically.
    """

    name: str
    kind: str = CONTINUOUS
    categories: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns to roles: treatment, outcome, covariates, optional id."""

    treatment: str
    outcome: str
    covariates: tuple[CovariateColumn, ...]
    id_column: str | None = None


@dataclass(frozen=True)
class CovariateSpec:
    """One encoded covariate: name plus kind (continuous or binary)."""

    name: str
    kind: str


@dataclass(frozen=True, eq=False)
class PatientRecord:
    """A single patient: covariate vector, treatment flag, outcome flag."""

    id: str
    covariates: np.ndarray
    treatment: int
    outcome: int

    def __post_init__(self):
        vec = np.asarray(self.covariates, dtype=float)
        if vec.ndim != 1:
            raise BadValue(f"record {self.id}: covariates must be a flat vector")
        if not np.all(np.isfinite(vec)):
            raise BadValue(f"record {self.id}: non-finite covariate")
        if self.treatment not in (0, 1):
            raise BadValue(f"record {self.id}: treatment must be 0 or 1")
        if self.outcome not in (0, 1):
            raise BadValue(f"record {self.id}: outcome must be 0 or 1")
        vec.setflags(write=False)
        object.__setattr__(self, "covariates", vec)


@dataclass(frozen=True, eq=False)
class Cohort:
    """Immutable collection of records sharing one encoded schema."""

    schema: tuple[CovariateSpec, ...]
    records: tuple[PatientRecord, ...]
    normalization: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "schema", tuple(self.schema))
        d = len(self.schema)
        for rec in self.records:
            if rec.covariates.shape[0] != d:
                raise BadValue(
                    f"record {rec.id}: expected {d} covariates, got {rec.covariates.shape[0]}"
                )

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def d(self) -> int:
        return len(self.schema)

    def covariate_names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.schema)

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.records)

    def feature_matrix(self) -> np.ndarray:
        if self.n == 0:
            return np.empty((0, self.d))
        return np.vstack([rec.covariates for rec in self.records])

    def treatments(self) -> np.ndarray:
        return np.array([rec.treatment for rec in self.records], dtype=int)

    def outcomes(self) -> np.ndarray:
        return np.array([rec.outcome for rec in self.records], dtype=int)


def _parse_binary_flag(raw: str, column: str, row: int) -> int:
    text = raw.strip()
    if not text:
        raise BadValue(f"row {row}: empty cell in column '{column}'")
    try:
        value = float(text)
    except ValueError:
        raise BadValue(f"row {row}: non-numeric value '{raw}' in column '{column}'") from None
    if value not in (0.0, 1.0):
        raise BadValue(f"row {row}: column '{column}' must be 0 or 1, got '{raw}'")
    return int(value)


def _parse_continuous(raw: str, column: str, row: int) -> float:
    text = raw.strip()
    if not text:
        raise BadValue(f"row {row}: empty cell in column '{column}'")
    try:
        value = float(text)
    except ValueError:
        raise BadValue(f"row {row}: non-numeric value '{raw}' in column '{column}'") from None
    if not math.isfinite(value):
        raise BadValue(f"row {row}: non-finite value '{raw}' in column '{column}'")
    return value


def load_cohort(source: str | Path | IO[str], schema: ColumnSchema) -> Cohort:
    """Read a comma-separated file with a header row into a Cohort.

    Categorical covariates are one-hot encoded with categories sorted
    lexicographically (or in the pinned order when the schema supplies one).
    Missing or malformed cells raise rather than impute.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return load_cohort(handle, schema)

    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    required = [schema.treatment, schema.outcome] + [c.name for c in schema.covariates]
    if schema.id_column is not None:
        required.append(schema.id_column)
    missing = [name for name in required if name not in header]
    if missing:
        raise MissingColumn(f"columns missing from header: {', '.join(missing)}")
    if not schema.covariates:
        raise MissingColumn("schema names no covariate columns")

    rows = list(reader)

    # Category inventory pass for all categorical columns without a pinned layout.
    categories: dict[str, tuple[str, ...]] = {}
    for col in schema.covariates:
        if col.kind != CATEGORICAL:
            continue
        if col.categories is not None:
            categories[col.name] = tuple(col.categories)
            continue
        seen = set()
        for i, row in enumerate(rows):
            value = (row.get(col.name) or "").strip()
            if not value:
                raise BadValue(f"row {i}: empty cell in column '{col.name}'")
            seen.add(value)
        categories[col.name] = tuple(sorted(seen))

    encoded_schema: list[CovariateSpec] = []
    for col in schema.covariates:
        if col.kind == CONTINUOUS:
            encoded_schema.append(CovariateSpec(col.name, CONTINUOUS))
        elif col.kind == CATEGORICAL:
            for cat in categories[col.name]:
                encoded_schema.append(CovariateSpec(f"{col.name}={cat}", BINARY))
        elif col.kind == BINARY:
            encoded_schema.append(CovariateSpec(col.name, BINARY))
        else:
            raise BadValue(f"unknown covariate kind '{col.kind}' for column '{col.name}'")

    records: list[PatientRecord] = []
    seen_ids: set[str] = set()
    for i, row in enumerate(rows):
        values: list[float] = []
        for col in schema.covariates:
            raw = row.get(col.name) or ""
            if col.kind == CONTINUOUS:
                values.append(_parse_continuous(raw, col.name, i))
            elif col.kind == BINARY:
                values.append(float(_parse_binary_flag(raw, col.name, i)))
            else:
                value = raw.strip()
                if not value:
                    raise BadValue(f"row {i}: empty cell in column '{col.name}'")
                cats = categories[col.name]
                if value not in cats:
                    raise BadValue(
                        f"row {i}: unseen category '{value}' in column '{col.name}'"
                    )
                values.extend(1.0 if value == cat else 0.0 for cat in cats)
        treatment = _parse_binary_flag(row.get(schema.treatment) or "", schema.treatment, i)
        outcome = _parse_binary_flag(row.get(schema.outcome) or "", schema.outcome, i)
        rid = (row.get(schema.id_column) or "").strip() if schema.id_column else f"r{i}"
        if not rid:
            raise BadValue(f"row {i}: empty id cell")
        if rid in seen_ids:
            raise BadValue(f"row {i}: duplicate id '{rid}'")
        seen_ids.add(rid)
        records.append(PatientRecord(rid, np.array(values), treatment, outcome))

    return Cohort(tuple(encoded_schema), tuple(records))


def column_statistics(cohort: Cohort) -> dict[str, tuple[float, float]]:
    """Per continuous covariate (mean, population stddev); constant columns get stddev 1."""
    if cohort.n < 2:
        raise DegenerateCohort("normalization needs at least 2 records")
    X = cohort.feature_matrix()
    stats: dict[str, tuple[float, float]] = {}
    for j, spec in enumerate(cohort.schema):
        if spec.kind != CONTINUOUS:
            continue
        col = X[:, j]
        mean = float(np.mean(col))
        std = float(np.sqrt(np.mean((col - mean) ** 2)))
        if std == 0.0:
            std = 1.0
        stats[spec.name] = (mean, std)
    return stats


def apply_normalization(
    cohort: Cohort, normalization: dict[str, tuple[float, float]]
) -> Cohort:
    """Standardize continuous covariates with the given statistics.

    Used both internally by :func:`normalize` and to project external
    cohorts into the training cohort's standardized feature space.
    """
    X = cohort.feature_matrix().copy()
    for j, spec in enumerate(cohort.schema):
        if spec.name in normalization:
            mean, std = normalization[spec.name]
            X[:, j] = (X[:, j] - mean) / std
    records = tuple(
        PatientRecord(rec.id, X[i], rec.treatment, rec.outcome)
        for i, rec in enumerate(cohort.records)
    )
    return Cohort(cohort.schema, records, dict(normalization))


def normalize(cohort: Cohort) -> Cohort:
    """Standardize each continuous covariate to mean 0 / stddev 1 (population stddev).

    The statistics are stored on the returned cohort so they can be reapplied
    to other data. Binary columns are left untouched.
    """
    return apply_normalization(cohort, column_statistics(cohort))


def split(cohort: Cohort, validation_fraction: float, seed: int) -> tuple[Cohort, Cohort]:
    """Deterministic partition into (train, validation), stratified on (treatment, outcome).

    Each of the four (t, y) cells is split separately so both halves keep
    the joint composition to within one record per cell. Empty cells are
    skipped. Identical seeds give identical partitions.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must lie strictly between 0 and 1")
    if cohort.n == 0:
        raise EmptyStratum("cannot split an empty cohort")

    rng = np.random.default_rng(seed)
    validation_idx: set[int] = set()
    t = cohort.treatments()
    y = cohort.outcomes()
    for cell_t, cell_y in ((0, 0), (0, 1), (1, 0), (1, 1)):
        cell = np.flatnonzero((t == cell_t) & (y == cell_y))
        if cell.size == 0:
            continue
        take = int(cell.size * validation_fraction + 0.5)
        perm = rng.permutation(cell.size)
        validation_idx.update(int(cell[k]) for k in perm[:take])

    train_records = tuple(
        rec for i, rec in enumerate(cohort.records) if i not in validation_idx
    )
    val_records = tuple(rec for i, rec in enumerate(cohort.records) if i in validation_idx)
    return (
        Cohort(cohort.schema, train_records, cohort.normalization),
        Cohort(cohort.schema, val_records, cohort.normalization),
    )


def untreated_subset(cohort: Cohort) -> Cohort:
    """Records with treatment 0, e.g. to form an external validation cohort."""
    return Cohort(
        cohort.schema,
        tuple(rec for rec in cohort.records if rec.treatment == 0),
        cohort.normalization,
    )


def write_csv(
    cohort: Cohort,
    path: str | Path,
    *,
    id_column: str = "id",
    treatment_column: str = "treatment",
    outcome_column: str = "outcome",
) -> None:
    """Write the cohort in the same CSV layout :func:`load_cohort` reads."""
    names = cohort.covariate_names()
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([id_column, *names, treatment_column, outcome_column])
        for rec in cohort.records:
            writer.writerow(
                [rec.id, *(repr(v) for v in rec.covariates), rec.treatment, rec.outcome]
            )


def normalization_to_obj(
    normalization: dict[str, tuple[float, float]] | None,
) -> dict[str, dict[str, float]]:
    """Normalization statistics as a JSON-ready {covariate: {mean, std}} object."""
    if not normalization:
        return {}
    return {
        name: {"mean": mean, "std": std} for name, (mean, std) in normalization.items()
    }


def cohort_to_obj(cohort: Cohort) -> dict:
    """JSON-ready representation preserving floats exactly (via repr round-trip)."""
    return {
        "schema": [{"name": s.name, "kind": s.kind} for s in cohort.schema],
        "normalization": normalization_to_obj(cohort.normalization),
        "records": [
            {
                "id": rec.id,
                "covariates": [float(v) for v in rec.covariates],
                "treatment": rec.treatment,
                "outcome": rec.outcome,
            }
            for rec in cohort.records
        ],
    }


def cohort_from_obj(obj: dict) -> Cohort:
    schema = tuple(CovariateSpec(s["name"], s["kind"]) for s in obj["schema"])
    normalization = {
        name: (entry["mean"], entry["std"])
        for name, entry in (obj.get("normalization") or {}).items()
    } or None
    records = tuple(
        PatientRecord(
            r["id"], np.array(r["covariates"], dtype=float), r["treatment"], r["outcome"]
        )
        for r in obj["records"]
    )
    return Cohort(schema, records, normalization)
