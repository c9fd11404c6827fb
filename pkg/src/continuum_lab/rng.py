"""SplitMix64 streams and FNV-1a seed derivation.

Every random draw in the emulator and the optimizer comes from a
:class:`SplitMix64` stream whose seed is derived with :func:`hash64` from the
master seed plus a role string and identifiers. Both algorithms are fully
specified integer recipes, so streams are identical on every platform.
"""

MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SEPARATOR = b"\x1f"


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def hash64(*parts) -> int:
    """Derive a 64-bit seed from ``parts``.

    Integers are rendered in decimal, strings as UTF-8, and parts are joined
    with the ASCII unit separator (0x1F) before hashing with FNV-1a 64.

    >>> hash64(0, "link", "edge", "cloud", 0) == hash64(0, "link", "edge", "cloud", 0)
    True
    """
    encoded = _SEPARATOR.join(str(p).encode("utf-8") for p in parts)
    return fnv1a64(encoded)


class SplitMix64:
    """Deterministic 64-bit generator (Steele, Lea & Flood)."""

    __slots__ = ("state", "draws")

    def __init__(self, seed: int):
        self.state = seed & MASK64
        self.draws = 0

    @classmethod
    def for_role(cls, master_seed: int, role: str, *ids) -> "SplitMix64":
        return cls(hash64(master_seed, role, *ids))

    def next_u64(self) -> int:
        self.draws += 1
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Integer in ``[0, n)`` from exactly one draw (multiply-shift)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def integer(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` from exactly one draw."""
        return lo + self.below(hi - lo + 1)

    def random(self) -> float:
        """Float in ``[0, 1)`` with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def bernoulli(self, p) -> bool:
        """True with probability ``p`` (a Fraction or int in [0, 1]); one draw.

        The comparison ``u < p`` is done on integers: ``x * q < num * 2**64``.
        """
        num, den = p.numerator, p.denominator
        return self.next_u64() * den < num << 64
