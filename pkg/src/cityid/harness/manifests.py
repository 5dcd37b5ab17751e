"""CSV manifests for the urban-sound exemplars and the city soundtracks."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadClassId, BadFold, MissingColumn, MissingFile, UnknownCity, ValidationError
from ..semantic import URBAN_CLASSES

log = logging.getLogger(__name__)

CITIES = (
    "Bangkok", "Barcelona", "Beijing", "Berlin", "Rio",
    "Chicago", "Houston", "London", "Rome", "Tokyo",
    "Moscow", "New York", "Paris", "Praha",
    "Los Angeles", "Sydney", "San Francisco", "Seoul",
)

URBANSOUND_COLUMNS = ("slice_file_name", "fsID", "start", "end", "salience", "fold", "classID", "class")

# proportion of the 1,080-video protocol: 541 train / 539 test
TRAIN_FRACTION = 541 / 1080


@dataclass(frozen=True)
class UrbanSoundEntry:
    slice_file_name: str
    fsID: str
    start_s: float
    end_s: float
    salience: int
    fold: int
    class_id: int
    class_name: str

    def audio_path(self, audio_root) -> Path:
        return Path(audio_root) / f"fold{self.fold}" / self.slice_file_name


@dataclass(frozen=True)
class CityEntry:
    path: Path
    city: str

    @property
    def video_id(self) -> str:
        return self.path.stem


def _require_columns(fieldnames, required, path):
    missing = [c for c in required if c not in (fieldnames or ())]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")


def load_urbansound_manifest(path) -> list[UrbanSoundEntry]:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, URBANSOUND_COLUMNS, path)
        for line, row in enumerate(reader, start=2):
            try:
                class_id = int(row["classID"])
                fold = int(row["fold"])
                start, end = float(row["start"]), float(row["end"])
                salience = int(row["salience"])
            except ValueError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from None
            if not 0 <= class_id < len(URBAN_CLASSES) or URBAN_CLASSES[class_id] != row["class"]:
                raise BadClassId(f"{path}:{line}: classID {class_id} does not match class {row['class']!r}")
            if not 1 <= fold <= 10:
                raise BadFold(f"{path}:{line}: fold {fold} outside 1..10")
            if end < start:
                raise ValidationError(f"{path}:{line}: end before start")
            if salience not in (1, 2):
                raise ValidationError(f"{path}:{line}: salience must be 1 or 2")
            entries.append(UrbanSoundEntry(row["slice_file_name"], row["fsID"], start, end, salience, fold,
                                           class_id, row["class"]))
    log.info("%s: %d urban-sound entries", path, len(entries))
    return entries


def canonical_city(name: str) -> str:
    lookup = {c.lower(): c for c in CITIES}
    try:
        return lookup[name.strip().lower()]
    except KeyError:
        raise UnknownCity(f"{name!r} is not one of the {len(CITIES)} cities") from None


def load_city_manifest(path) -> list[CityEntry]:
    """Rows of (path, city); relative paths resolve against the manifest's directory."""
    path = Path(path)
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("path", "city"), path)
        for row in reader:
            p = Path(row["path"])
            if not p.is_absolute():
                p = path.parent / p
            entry = CityEntry(p, canonical_city(row["city"]))
            if not p.exists():
                warnings.warn(f"{path}: {p} does not exist", MissingFile, stacklevel=2)
            entries.append(entry)
    return entries


def split_train_test(entries, seed: int, train_fraction: float = TRAIN_FRACTION):
    """Seeded shuffle, then the first round(N * train_fraction) items train."""
    order = np.random.default_rng(seed).permutation(len(entries))
    n_train = int(round(len(entries) * train_fraction))
    train = [entries[i] for i in sorted(order[:n_train])]
    test = [entries[i] for i in sorted(order[n_train:])]
    return train, test


def shuffle_cities(entries, seed: int):
    """Same soundtracks with their city labels permuted (a chance-level control)."""
    perm = np.random.default_rng(seed).permutation(len(entries))
    return [CityEntry(e.path, entries[j].city) for e, j in zip(entries, perm)]
