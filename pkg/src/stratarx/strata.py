"""Baseline-risk buckets: assignment, imbalance diagnosis, merging, oversampling.

Buckets partition [0, 1] into left-closed, right-open intervals (the last
one right-closed). Observational pipelines use them to match arms bucket by
bucket; randomized-cohort pipelines use them to diagnose small-sample arm
imbalances, merge adjacent flagged buckets, and oversample the thin arm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import PatientRecord
from .errors import EmptyArm, NotAdjacent, OutOfRange


@dataclass(frozen=True)
class BucketSpec:
    """Edges 0 = e_0 < e_1 < ... < e_m = 1 defining m risk intervals."""

    edges: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) < 2:
            raise ValueError("a bucket spec needs at least two edges")
        if edges[0] != 0.0 or edges[-1] != 1.0:
            raise ValueError("edges must start at 0 and end at 1")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.edges) - 1

    def interval(self, bucket: int) -> tuple[float, float]:
        """Bounds of 1-indexed bucket k."""
        return self.edges[bucket - 1], self.edges[bucket]

    @staticmethod
    def equal_width(m: int) -> "BucketSpec":
        if m < 1:
            raise ValueError("need at least one bucket")
        return BucketSpec(tuple(np.linspace(0.0, 1.0, m + 1)))

    @staticmethod
    def tenths_to_half() -> "BucketSpec":
        """Five 10%-wide bands up to 0.5, then one band for everything above."""
        return BucketSpec((0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0))


@dataclass(frozen=True)
class RiskProfile:
    """A patient's estimated baseline risk and the bucket it falls in."""

    id: str
    risk: float
    bucket: int


@dataclass(frozen=True)
class BucketBalance:
    bucket: int
    low: float
    high: float
    n_untreated: int
    n_treated: int
    ratio: float
    flagged: bool


@dataclass(frozen=True)
class BalanceReport:
    """Per-bucket arm counts with imbalance flags."""

    rows: tuple[BucketBalance, ...]
    ratio_threshold: float

    def flagged_buckets(self) -> tuple[int, ...]:
        return tuple(row.bucket for row in self.rows if row.flagged)

    def to_obj(self) -> dict:
        return {
            "ratio_threshold": self.ratio_threshold,
            "buckets": [
                {
                    "bucket": r.bucket,
                    "low": r.low,
                    "high": r.high,
                    "n_untreated": r.n_untreated,
                    "n_treated": r.n_treated,
                    "ratio": r.ratio,
                    "flagged": r.flagged,
                }
                for r in self.rows
            ],
        }


def assign_buckets(risks: np.ndarray, spec: BucketSpec) -> np.ndarray:
    """Map each risk in [0, 1] to its 1-indexed bucket.

    Intervals are left-closed and right-open; the last is right-closed, so
    a risk exactly on an interior edge belongs to the bucket above it.
    """
    risks = np.asarray(risks, dtype=float)
    if risks.size and (risks.min() < 0.0 or risks.max() > 1.0):
        bad = risks[(risks < 0.0) | (risks > 1.0)][0]
        raise OutOfRange(f"risk {bad} lies outside [0, 1]")
    edges = np.asarray(spec.edges)
    buckets = np.searchsorted(edges, risks, side="right")
    buckets[risks == 1.0] = spec.m
    return buckets.astype(int)


def build_profiles(ids, risks, spec: BucketSpec) -> tuple[RiskProfile, ...]:
    """Bundle ids, risks, and bucket assignments into RiskProfiles."""
    buckets = assign_buckets(np.asarray(risks, dtype=float), spec)
    return tuple(
        RiskProfile(str(i), float(r), int(b)) for i, r, b in zip(ids, risks, buckets)
    )


def diagnose(
    treatments: np.ndarray,
    buckets: np.ndarray,
    spec: BucketSpec,
    ratio_threshold: float = 1.5,
) -> BalanceReport:
    """Count arms per bucket; flag ratio > threshold or an empty arm."""
    if ratio_threshold < 1.0:
        raise ValueError("ratio_threshold must be >= 1")
    treatments = np.asarray(treatments, dtype=int)
    buckets = np.asarray(buckets, dtype=int)
    rows = []
    for k in range(1, spec.m + 1):
        in_bucket = buckets == k
        n1 = int((treatments[in_bucket] == 1).sum())
        n0 = int(in_bucket.sum()) - n1
        ratio = max(n0, n1) / max(1, min(n0, n1))
        flagged = ratio > ratio_threshold or min(n0, n1) == 0
        low, high = spec.interval(k)
        rows.append(BucketBalance(k, low, high, n0, n1, ratio, flagged))
    return BalanceReport(tuple(rows), ratio_threshold)


def merge_buckets(spec: BucketSpec, k_from: int, k_to: int) -> BucketSpec:
    """Remove the edge between adjacent buckets k_from and k_to = k_from + 1."""
    if k_to != k_from + 1:
        raise NotAdjacent(f"buckets {k_from} and {k_to} are not adjacent")
    if k_from < 1 or k_to > spec.m:
        raise ValueError(f"bucket pair ({k_from}, {k_to}) out of range for m={spec.m}")
    edges = list(spec.edges)
    del edges[k_from]
    return BucketSpec(tuple(edges))


def oversample(
    records: list[PatientRecord],
    target_per_arm: int,
    seed: int,
) -> list[PatientRecord]:
    """Bring both arms of one bucket up to target_per_arm by duplication.

    Originals are all kept; duplicates are drawn with replacement from the
    same arm and get a ``~k`` replica suffix on their id. Whole records are
    duplicated without jitter so downstream distances stay meaningful.
    """
    arm0 = [r for r in records if r.treatment == 0]
    arm1 = [r for r in records if r.treatment == 1]
    if not arm0 or not arm1:
        raise EmptyArm("oversample needs both arms present")
    if target_per_arm < max(len(arm0), len(arm1)):
        raise ValueError("target_per_arm must be at least the larger arm size")
    rng = np.random.default_rng(seed)
    out = list(records)
    for arm in (arm0, arm1):
        deficit = target_per_arm - len(arm)
        if deficit == 0:
            continue
        picks = rng.integers(0, len(arm), size=deficit)
        for k, pick in enumerate(picks, start=1):
            src = arm[int(pick)]
            out.append(
                PatientRecord(f"{src.id}~{k}", src.covariates, src.treatment, src.outcome)
            )
    return out
