"""splitmix64, the only PRNG on the consensus path."""
import hashlib

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream. ``SplitMix64(0).next()`` is ``0xE220A8397B1DCDAF``."""

    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, bound):
        """Integer in ``[0, bound)`` by plain modulo reduction."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next() % bound

    def shuffle(self, items):
        """Fisher-Yates in place, walking from the last index down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


def derive_seed(*parts):
    """Stable 64-bit seed from a tuple of ints/strings (SHA-256 of their repr)."""
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
