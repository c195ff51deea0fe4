"""Hyperdimensional computing primitives with integer-exact inference.

Hypervectors are plain 1-D numpy arrays: bipolar ones hold -1/+1 (int8 is
enough), bundled ones hold signed integers (int64). Item and associative
memories stack them as rows of a 2-D array.

Nothing on the path from nonce to accuracy touches floating point except the
feature quantizer, and that one is corrected to the exact rational result.
"""
from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np

from . import kernels
from .errors import ConfigurationError

NONCE_LIMIT = 1 << 32
_INT64_SAFE = 1 << 62


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def as_bipolar(x):
    hv = np.asarray(x)
    if hv.ndim != 1 or hv.size == 0:
        raise ValueError("a hypervector is a non-empty 1-D sequence")
    if not np.all((hv == 1) | (hv == -1)):
        raise ValueError("bipolar hypervector elements must be -1 or +1")
    return hv.astype(np.int8)


def as_int_hv(x):
    hv = np.asarray(x)
    if hv.ndim != 1 or hv.size == 0:
        raise ValueError("a hypervector is a non-empty 1-D sequence")
    if not np.issubdtype(hv.dtype, np.integer):
        if not np.all(np.equal(np.mod(hv, 1), 0)):
            raise ValueError("integer hypervector elements must be integers")
    return hv.astype(np.int64)


def hv_add(a, b):
    a, b = as_int_hv(a), as_int_hv(b)
    _check_same_dim(a, b)
    return a + b


def hv_multiply(a, b):
    """Bind two bipolar hypervectors elementwise."""
    a, b = as_bipolar(a), as_bipolar(b)
    _check_same_dim(a, b)
    return a * b


def hv_permute(a, shift):
    """Cyclic shift: element ``i`` moves to ``(i + shift) mod d``."""
    a = np.asarray(a)
    return np.roll(a, shift % a.shape[0])


@dataclass(frozen=True)
class ExactAccuracy:
    correct: int
    total: int

    def __post_init__(self):
        if self.total < 1 or not 0 <= self.correct <= self.total:
            raise ValueError(f"invalid accuracy {self.correct}/{self.total}")

    @property
    def fraction(self):
        return Fraction(self.correct, self.total)

    def meets(self, threshold):
        threshold = Fraction(threshold)
        return self.correct * threshold.denominator >= threshold.numerator * self.total

    def __str__(self):
        return f"{self.correct}/{self.total} ({100 * self.correct / self.total:.2f}%)"

    @classmethod
    def parse(cls, text):
        """Parse ``"correct/total"``."""
        try:
            correct, total = text.strip().split("/")
            return cls(int(correct), int(total))
        except ValueError as exc:
            raise ValueError(f"expected 'correct/total', got {text!r}") from exc


@dataclass(frozen=True)
class EncodingConfig:
    dim: int
    num_levels: int = 10
    feature_bounds: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.dim}")
        if self.num_levels < 2:
            raise ConfigurationError(f"need at least 2 levels, got {self.num_levels}")
        for lo, hi in self.feature_bounds:
            if not lo <= hi:
                raise ConfigurationError(f"feature bounds out of order: ({lo}, {hi})")

    @classmethod
    def from_training(cls, dim, num_levels, features):
        """Bounds are the per-column min/max of the training features."""
        features = np.asarray(features, dtype=np.float64)
        bounds = tuple(zip(features.min(axis=0).tolist(), features.max(axis=0).tolist()))
        return cls(dim, num_levels, bounds)


@dataclass(frozen=True, eq=False)
class ItemMemory:
    """Per-feature ID hypervectors and shared level hypervectors for one nonce."""

    id_hvs: np.ndarray
    level_hvs: np.ndarray
    seed_nonce: int

    @property
    def dim(self):
        return self.id_hvs.shape[1]

    @property
    def num_features(self):
        return self.id_hvs.shape[0]

    @property
    def num_levels(self):
        return self.level_hvs.shape[0]


@dataclass(frozen=True, eq=False)
class AssociativeMemory:
    class_hvs: np.ndarray

    @property
    def num_classes(self):
        return self.class_hvs.shape[0]

    @property
    def dim(self):
        return self.class_hvs.shape[1]

    @property
    def empty_classes(self):
        """Classes with no training samples; they can never be predicted."""
        return [c for c in range(self.num_classes) if not self.class_hvs[c].any()]


def level_flip_width(dim, num_levels):
    return dim // (2 * (num_levels - 1))


def gen_item_memory(nonce, config, num_features):
    """Build the item memory for ``nonce``.

    One splitmix64 stream seeded with the nonce supplies, in order, the ID
    hypervectors of features ``0..m-1`` and then level 0, one output per
    element (+1 when the low bit is set). Level ``i`` copies level ``i-1``
    and negates the index block ``[(i-1)f, i*f)`` with ``f = d // (2(L-1))``,
    so the first and last levels disagree on about half the positions.
    """
    if not 0 <= nonce < NONCE_LIMIT:
        raise ValueError(f"nonce must be a 32-bit unsigned integer, got {nonce}")
    if num_features < 1:
        raise ConfigurationError("need at least one feature")
    d, n_levels = config.dim, config.num_levels
    flip = level_flip_width(d, n_levels)
    if flip == 0:
        raise ConfigurationError(
            f"dimension {d} too small for {n_levels} levels (need >= {2 * (n_levels - 1)})"
        )
    signs = kernels.item_signs(nonce, 0, (num_features + 1) * d)
    id_hvs = signs[: num_features * d].reshape(num_features, d)
    level_hvs = np.empty((n_levels, d), dtype=np.int8)
    level_hvs[0] = signs[num_features * d:]
    for i in range(1, n_levels):
        level_hvs[i] = level_hvs[i - 1]
        level_hvs[i, (i - 1) * flip: i * flip] *= -1
    return ItemMemory(np.ascontiguousarray(id_hvs), level_hvs, nonce)


def quantize(value, bounds, num_levels):
    """Exact level index of ``value`` in ``bounds`` split into ``num_levels`` bins."""
    if num_levels < 2:
        raise ConfigurationError("need at least 2 levels")
    lo, hi = bounds
    if hi == lo:
        return 0
    scaled = (Fraction(value) - Fraction(lo)) * num_levels / (Fraction(hi) - Fraction(lo))
    return min(max(math.floor(scaled), 0), num_levels - 1)


def quantize_matrix(features, config):
    """Vectorized :func:`quantize` over an ``(N, m)`` array, returning int32 levels.

    The float estimate is only trusted away from bin edges; entries within
    rounding distance of an edge are recomputed with exact rationals.
    """
    features = np.asarray(features, dtype=np.float64)
    n_levels = config.num_levels
    bounds = np.asarray(config.feature_bounds, dtype=np.float64).reshape(-1, 2)
    if bounds.shape[0] != features.shape[1]:
        raise ValueError(
            f"{features.shape[1]} features but {bounds.shape[0]} bounds in the encoding config"
        )
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    flat = span == 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        est = (features - lo) / np.where(flat, 1.0, span) * n_levels
        levels = np.clip(np.floor(est), 0, n_levels - 1)
        near = np.abs(est - np.rint(est)) <= 1e-9 * np.maximum(1.0, np.abs(est))
    levels[:, flat] = 0
    near[:, flat] = False
    for r, c in zip(*np.nonzero(near)):
        levels[r, c] = quantize(features[r, c], (lo[c], hi[c]), n_levels)
    return levels.astype(np.int32)


def encode(features, im, config):
    """Record encoding: bundle of ID_j bound with the level HV of feature j."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (im.num_features,):
        raise ValueError(f"expected {im.num_features} features, got {features.shape[0]}")
    levels = quantize_matrix(features[None, :], config)[0]
    bound = im.id_hvs.astype(np.int64) * im.level_hvs[levels]
    return bound.sum(axis=0)


def train(encoded, num_classes, dim=None):
    """Sum encoded hypervectors per label into class hypervectors (single pass)."""
    encoded = list(encoded)
    if dim is None:
        if not encoded:
            raise ValueError("cannot infer dimension from an empty training set")
        dim = len(encoded[0][0])
    class_hvs = np.zeros((num_classes, dim), dtype=np.int64)
    for hv, label in encoded:
        if not 0 <= label < num_classes:
            raise ValueError(f"label {label} outside [0, {num_classes})")
        hv = as_int_hv(hv)
        _check_same_dim(hv, class_hvs[label])
        class_hvs[label] += hv
    return AssociativeMemory(class_hvs)


def _exact_dot(a, b):
    return int(np.dot(a.astype(object), b.astype(object)))


def similarity_order(dot_a, norm_a, dot_b, norm_b):
    """Sign of ``dot_a/sqrt(norm_a) - dot_b/sqrt(norm_b)`` using integers only.

    ``norm`` is the squared length; a zero-length class sits below everything.
    """
    if norm_a == 0 or norm_b == 0:
        return (norm_a != 0) - (norm_b != 0)
    sign_a = (dot_a > 0) - (dot_a < 0)
    sign_b = (dot_b > 0) - (dot_b < 0)
    if sign_a != sign_b:
        return 1 if sign_a > sign_b else -1
    if sign_a == 0:
        return 0
    lhs = dot_a * dot_a * norm_b
    rhs = dot_b * dot_b * norm_a
    order = (lhs > rhs) - (lhs < rhs)
    return order if sign_a > 0 else -order


def compare_similarity(q, a, b):
    """Compare cos(q, a) with cos(q, b): 1 if a is closer, -1 if b is, 0 on a tie."""
    q, a, b = as_int_hv(q), as_int_hv(a), as_int_hv(b)
    _check_same_dim(q, a)
    _check_same_dim(q, b)
    return similarity_order(_exact_dot(q, a), _exact_dot(a, a), _exact_dot(q, b), _exact_dot(b, b))


def argmax_similarity(dots, norms):
    """Index of the most similar class; ties keep the smallest index."""
    best = 0
    for c in range(1, len(dots)):
        if similarity_order(dots[c], norms[c], dots[best], norms[best]) > 0:
            best = c
    return best


def infer(query, am):
    query = as_int_hv(query)
    _check_same_dim(query, am.class_hvs[0])
    dots = [_exact_dot(query, c) for c in am.class_hvs]
    norms = [_exact_dot(c, c) for c in am.class_hvs]
    return argmax_similarity(dots, norms)


def evaluate(am, encoded_test):
    encoded_test = list(encoded_test)
    if not encoded_test:
        raise ValueError("cannot evaluate on an empty test set")
    correct = sum(infer(hv, am) == label for hv, label in encoded_test)
    return ExactAccuracy(int(correct), len(encoded_test))


# Fused paths used by mining: encode rows on the fly inside the kernels instead
# of materializing an (N, d) matrix. Results equal encode -> train -> evaluate.

def _squared_norms(class_hvs):
    peak = int(np.abs(class_hvs).max(initial=0))
    if class_hvs.shape[1] * peak * peak < _INT64_SAFE:
        return [int(v) for v in np.einsum("ij,ij->i", class_hvs, class_hvs)]
    return [_exact_dot(c, c) for c in class_hvs]


def train_quantized(levels, labels, im, num_classes):
    """Train from pre-quantized ``(N, m)`` levels."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    counts = np.bincount(labels, minlength=num_classes)
    if im.num_features * int(counts.max(initial=0)) >= _INT64_SAFE:
        raise OverflowError("class sums would overflow int64")
    class_hvs = kernels.class_sums(
        np.ascontiguousarray(levels, dtype=np.int32), labels, im.id_hvs, im.level_hvs, num_classes
    )
    return AssociativeMemory(class_hvs)


def evaluate_quantized(am, levels, labels, im):
    """Exact accuracy of ``am`` on pre-quantized test rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot evaluate on an empty test set")
    peak = int(np.abs(am.class_hvs).max(initial=0))
    if am.dim * im.num_features * peak >= _INT64_SAFE:
        raise OverflowError("query dot products would overflow int64")
    dots = kernels.query_dots(
        np.ascontiguousarray(levels, dtype=np.int32), im.id_hvs, im.level_hvs, am.class_hvs
    )
    norms = _squared_norms(am.class_hvs)
    correct = 0
    for row, label in zip(dots.tolist(), labels.tolist()):
        correct += argmax_similarity(row, norms) == label
    return ExactAccuracy(correct, len(labels))
