"""Datasets: CSV I/O, canonical SHA-256 identity, stratified splitting, synthetic blobs."""
import csv
from dataclasses import dataclass
from fractions import Fraction
import hashlib
import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DatasetError
from .rng import SplitMix64


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
            raise DatasetError(f"features must be a non-empty 2-D array, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DatasetError("one label per sample required")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features must be finite")
        if self.num_classes < 1 or labels.min() < 0 or labels.max() >= self.num_classes:
            raise DatasetError(f"labels must lie in [0, {self.num_classes})")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def majority_baseline(self):
        """Accuracy of always predicting the most frequent class."""
        return Fraction(int(self.class_counts().max()), self.n_samples)

    def subset(self, indices, name):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(name, self.features[indices], self.labels[indices], self.num_classes)


def _parse_label(text, row):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"label {text!r} is not an integer", row) from None
    if not value.is_integer():
        raise DatasetError(f"label {text!r} is not an integer", row)
    return int(value)


def load_csv(path, has_header=False, name=None):
    """Read ``features..., label`` rows. Labels are remapped to ``0..k-1`` in sorted order."""
    path = Path(path)
    rows, raw_labels = [], []
    width = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) < 2:
                raise DatasetError("need at least one feature and a label", lineno)
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DatasetError(f"expected {width} columns, found {len(record)}", lineno)
            try:
                rows.append([float(cell) for cell in record[:-1]])
            except ValueError as exc:
                raise DatasetError(f"non-numeric feature ({exc})", lineno) from None
            raw_labels.append(_parse_label(record[-1].strip(), lineno))
    if not rows:
        raise DatasetError(f"{path} contains no samples")
    distinct = sorted(set(raw_labels))
    remap = {label: i for i, label in enumerate(distinct)}
    return Dataset(
        name if name is not None else path.stem,
        np.array(rows, dtype=np.float64),
        np.array([remap[v] for v in raw_labels], dtype=np.int64),
        len(distinct),
    )


def save_csv(ds, path):
    """Write without a header; floats use the shortest round-tripping repr."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row, label in zip(ds.features.tolist(), ds.labels.tolist()):
            writer.writerow([repr(v) for v in row] + [label])


def canonical_bytes(ds):
    header = ds.name.encode("utf-8") + b"\x00"
    header += np.array([ds.n_samples, ds.n_features, ds.num_classes], dtype=">u8").tobytes()
    return header + ds.features.astype(">f8").tobytes() + ds.labels.astype(">u4").tobytes()


def dataset_hash(ds):
    """SHA-256 over the canonical layout: name, NUL, N/m/k as u64 BE, f64 BE features, u32 BE labels."""
    return hashlib.sha256(canonical_bytes(ds)).digest()


def task_hash(train, test):
    """Identity of a train/test pair: SHA-256 of the two dataset digests concatenated."""
    return hashlib.sha256(dataset_hash(train) + dataset_hash(test)).digest()


def split(ds, train_fraction, split_seed):
    """Stratified, seeded split.

    One splitmix64 stream shuffles each class's indices in turn (classes in
    ascending order); the first ``ceil(fraction * count)`` of each go to train.
    Both halves keep the original sample order.
    """
    fraction = Fraction(train_fraction)
    if not 0 < fraction < 1:
        raise ConfigurationError(f"train fraction must lie strictly between 0 and 1, got {fraction}")
    rng = SplitMix64(split_seed)
    train_idx, test_idx = [], []
    for c in range(ds.num_classes):
        members = np.flatnonzero(ds.labels == c).tolist()
        if len(members) < 2:
            raise ConfigurationError(f"class {c} has {len(members)} sample(s); cannot stratify")
        rng.shuffle(members)
        cut = math.ceil(fraction * len(members))
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    if not test_idx:
        raise ConfigurationError("split left the test set empty")
    return (
        ds.subset(sorted(train_idx), f"{ds.name}/train"),
        ds.subset(sorted(test_idx), f"{ds.name}/test"),
    )


def make_blobs(num_classes, num_features, samples_per_class, separation=3.0, seed=0, name="synthetic"):
    """Gaussian blobs: class centers ~ N(0, separation^2), unit-variance noise around them."""
    if num_classes < 1 or num_features < 1 or samples_per_class < 1:
        raise ConfigurationError("classes, features and samples per class must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, separation, size=(num_classes, num_features))
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    features = centers[labels] + rng.normal(0.0, 1.0, size=(labels.size, num_features))
    order = rng.permutation(labels.size)
    return Dataset(name, features[order], labels[order], num_classes)
