"""Numpy implementations of the compiled kernels in ``_kernels.pyx``.

Same signatures, same integer results. Used when the extension is not built
or when ``HDCOIN_PURE_PYTHON`` is set.
"""
import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64_outputs(seed, offset, count):
    """Outputs ``offset .. offset+count-1`` of the splitmix64 stream seeded with ``seed``."""
    counters = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + counters * GOLDEN_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def item_signs(seed, offset, count):
    bits = splitmix64_outputs(seed, offset, count) & np.uint64(1)
    return np.where(bits == 1, 1, -1).astype(np.int8)


def _bound_table(id_hvs, level_hvs):
    # (m, L, d): every feature id bound with every level
    return id_hvs[:, None, :].astype(np.int32) * level_hvs[None, :, :]


def encode_rows(levels, id_hvs, level_hvs):
    table = _bound_table(id_hvs, level_hvs)
    out = np.zeros((levels.shape[0], id_hvs.shape[1]), dtype=np.int64)
    for j in range(id_hvs.shape[0]):
        out += table[j, levels[:, j]]
    return out


def class_sums(levels, labels, id_hvs, level_hvs, num_classes, chunk=256):
    out = np.zeros((num_classes, id_hvs.shape[1]), dtype=np.int64)
    for start in range(0, levels.shape[0], chunk):
        rows = encode_rows(levels[start:start + chunk], id_hvs, level_hvs)
        np.add.at(out, labels[start:start + chunk], rows)
    return out


def query_dots(levels, id_hvs, level_hvs, class_hvs, chunk=256):
    out = np.empty((levels.shape[0], class_hvs.shape[0]), dtype=np.int64)
    classes_t = np.ascontiguousarray(class_hvs.T)
    for start in range(0, levels.shape[0], chunk):
        rows = encode_rows(levels[start:start + chunk], id_hvs, level_hvs)
        out[start:start + chunk] = rows @ classes_t
    return out
