"""Counter-based random streams.

Every random quantity in a campaign is drawn from a SplitMix64 stream whose
starting state is derived from a tuple of integers (master seed, structure
index, trial index, ...).  Workers therefore never share generator state and
results do not depend on how indices are scheduled.

The numba kernels in :mod:`excitrans._kernels` implement the same arithmetic;
``tests/test_seeding.py`` checks that both agree bit for bit.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)

GENERATOR_NAME = "splitmix64"


def mix64(z):
    """SplitMix64 finalizer, a bijection on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive(*keys):
    """Fold integer keys into one 64-bit stream state."""
    state = 0
    for i, k in enumerate(keys):
        state = mix64(state) ^ (k & MASK64) if i else k & MASK64
    return mix64(state)


class SplitMix64:
    """Minimal SplitMix64 stream producing 53-bit uniform doubles."""

    def __init__(self, state=0):
        self.state = state & MASK64

    @classmethod
    def from_keys(cls, *keys):
        return cls(derive(*keys))

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self):
        return (self.next_u64() >> 11) * _INV_2_53

    def uniforms(self, count):
        return [self.uniform() for _ in range(count)]

    def integers(self, high):
        """Uniform integer in ``[0, high)`` by rejection of the biased tail."""
        if high <= 0:
            raise ValueError("high must be positive")
        limit = (1 << 64) - ((1 << 64) % high)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % high
