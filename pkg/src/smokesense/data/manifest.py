"""Fire manifest: one row per fire, plus fire-level train/val/test splits.

Splitting is always by fire, never by frame, so no sequence contributes
samples to two splits. Fractional seat counts are resolved by largest
remainder, ties broken toward the earlier split (train, val, test).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from smokesense.weather.types import CameraPose, ensure_utc, parse_utc

MANIFEST_FILENAME = "manifest.csv"
MANIFEST_COLUMNS = (
    "fire_id",
    "camera_id",
    "ignition",
    "latitude",
    "longitude",
    "view_azimuth",
    "split",
)
SPLIT_NAMES = ("train", "val", "test")

# train/val/test shares of the 255-fire corpus: 131, 63, and 61 fires
DEFAULT_SPLIT_FRACTIONS = (0.514, 0.247, 0.239)


@dataclass(frozen=True)
class ManifestEntry:
    fire_id: str
    camera_id: str
    ignition: datetime
    latitude: float
    longitude: float
    view_azimuth: float
    split: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ignition", ensure_utc(self.ignition))
        if self.split and self.split not in SPLIT_NAMES:
            raise ValueError(f"fire {self.fire_id}: unknown split {self.split!r}")

    @property
    def camera(self) -> CameraPose:
        return CameraPose(
            camera_id=self.camera_id,
            latitude=self.latitude,
            longitude=self.longitude,
            view_azimuth=self.view_azimuth,
        )


def write_manifest(path: Path | str, entries: Iterable[ManifestEntry]) -> None:
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(MANIFEST_COLUMNS)
        for e in entries:
            w.writerow(
                (
                    e.fire_id,
                    e.camera_id,
                    e.ignition.isoformat(),
                    repr(e.latitude),
                    repr(e.longitude),
                    repr(e.view_azimuth),
                    e.split,
                )
            )


def read_manifest(path: Path | str) -> list[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    entries = []
    seen: set[str] = set()
    with path.open(newline="") as f:
        for row in csv.DictReader(f):
            if row["fire_id"] in seen:
                raise ValueError(f"duplicate fire_id {row['fire_id']!r} in manifest")
            seen.add(row["fire_id"])
            entries.append(
                ManifestEntry(
                    fire_id=row["fire_id"],
                    camera_id=row["camera_id"],
                    ignition=parse_utc(row["ignition"]),
                    latitude=float(row["latitude"]),
                    longitude=float(row["longitude"]),
                    view_azimuth=float(row["view_azimuth"]),
                    split=row.get("split", ""),
                )
            )
    return entries


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        for name in SPLIT_NAMES:
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for a in range(len(SPLIT_NAMES)):
            for b in range(a + 1, len(SPLIT_NAMES)):
                overlap = set(getattr(self, SPLIT_NAMES[a])) & set(getattr(self, SPLIT_NAMES[b]))
                if overlap:
                    raise ValueError(
                        f"fires in both {SPLIT_NAMES[a]} and {SPLIT_NAMES[b]}: {sorted(overlap)}"
                    )

    def of(self, split: str) -> tuple[str, ...]:
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}")
        return getattr(self, split)

    @property
    def all_fire_ids(self) -> frozenset[str]:
        return frozenset(self.train) | frozenset(self.val) | frozenset(self.test)

    def split_of(self, fire_id: str) -> str:
        for name in SPLIT_NAMES:
            if fire_id in getattr(self, name):
                return name
        raise KeyError(f"fire {fire_id!r} is not in any split")


def largest_remainder_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer seat counts for `n` items: floor each quota, then hand the
    leftover seats to the largest fractional remainders (earlier wins ties)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be non-negative, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    quotas = [n * f for f in fractions]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in range(n - sum(counts)):
        counts[order[i]] += 1
    return counts


def make_splits(
    entries: Sequence[ManifestEntry],
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
    seed: int = 0,
    lists: tuple[Sequence[str], Sequence[str], Sequence[str]] | None = None,
) -> DatasetSplit:
    """Assign whole fires to train/val/test.

    With `lists`, the explicit fire-id lists are validated (disjoint,
    covering the manifest exactly) and used as-is. Otherwise the fires are
    shuffled deterministically by `seed` and dealt out with counts from
    `fractions` under the largest-remainder rule.
    """
    fire_ids = [e.fire_id for e in entries]
    if len(set(fire_ids)) != len(fire_ids):
        raise ValueError("manifest contains duplicate fire_ids")

    if lists is not None:
        split = DatasetSplit(train=tuple(lists[0]), val=tuple(lists[1]), test=tuple(lists[2]))
        missing = set(fire_ids) - split.all_fire_ids
        unknown = split.all_fire_ids - set(fire_ids)
        if missing or unknown:
            raise ValueError(
                f"explicit lists do not cover the manifest: "
                f"missing {sorted(missing)}, unknown {sorted(unknown)}"
            )
        return split

    if len(fractions) != len(SPLIT_NAMES):
        raise ValueError(f"need {len(SPLIT_NAMES)} fractions, got {len(fractions)}")
    counts = largest_remainder_counts(len(fire_ids), fractions)
    order = list(np.random.default_rng(seed).permutation(len(fire_ids)))
    shuffled = [fire_ids[i] for i in order]
    n_train, n_val, _ = counts
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
    )


def apply_split(entries: Sequence[ManifestEntry], split: DatasetSplit) -> list[ManifestEntry]:
    """Stamp each entry's split column from the fire-level assignment."""
    return [replace(e, split=split.split_of(e.fire_id)) for e in entries]
