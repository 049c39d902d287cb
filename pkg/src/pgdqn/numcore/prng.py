"""xoshiro256** generator seeded through splitmix64.

Pure Python so that streams are bit-identical on every platform; numpy's
bit generators are not used anywhere on a reproducibility-critical path.
"""
from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi
_JUMP = (0x180EC6D33CFD0ABA, 0xD5A61266F0C9392C, 0xA9582618E03FC9AA, 0x39ABDC4529B1661C)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class SplitMix64:
    """Seed expander recommended by the xoshiro authors."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


class Prng:
    algorithm = "xoshiro256**"

    def __init__(self, seed: int = 0, stream: int = 0):
        sm = SplitMix64(seed)
        self.s = [sm.next() for _ in range(4)]
        for _ in range(stream):
            self.jump()
        self._spare_normal: float | None = None

    @classmethod
    def from_state(cls, state) -> "Prng":
        state = [int(v) & _MASK for v in state]
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256** state must be four words, not all zero")
        rng = cls.__new__(cls)
        rng.s = state
        rng._spare_normal = None
        return rng

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def jump(self) -> None:
        """Advance 2**128 steps; used to carve non-overlapping substreams."""
        acc = [0, 0, 0, 0]
        for word in _JUMP:
            for b in range(64):
                if word & (1 << b):
                    acc = [a ^ s for a, s in zip(acc, self.s)]
                self.next_u64()
        self.s = acc

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of mantissa."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, n: int) -> int:
        """Unbiased integer in [0, n) (Lemire's multiply-and-reject)."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        x = self.next_u64()
        m = x * n
        low = m & _MASK
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                x = self.next_u64()
                m = x * n
                low = m & _MASK
        return m >> 64

    def normal(self) -> float:
        """Standard normal via Box-Muller, caching the paired variate."""
        if self._spare_normal is not None:
            z, self._spare_normal = self._spare_normal, None
            return z
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)

    def uniform_array(self, low: float, high: float, n: int) -> list[float]:
        span = high - low
        rnd = self.random
        return [low + span * rnd() for _ in range(n)]

    def normal_array(self, n: int) -> list[float]:
        nrm = self.normal
        return [nrm() for _ in range(n)]

    def state(self) -> tuple[int, int, int, int]:
        return tuple(self.s)
