from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer (Steele, Lea and Flood, 2014); a bijection on 64-bit integers."""
    x = (x + GOLDEN_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class SeedSpec:
    """
    Identifies one replication's random stream. The child seed is
    splitmix64(master_seed + GOLDEN_GAMMA * (replication_index + 1) mod 2^64), which feeds a PCG64 generator.
    """
    master_seed: int
    replication_index: int = 0

    def __post_init__(self):
        if self.replication_index < 0:
            raise ValueError(f"replication index must be >= 0, got {self.replication_index}")

    @property
    def child_seed(self) -> int:
        return splitmix64((self.master_seed + GOLDEN_GAMMA * (self.replication_index + 1)) & MASK64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.child_seed))

    def child(self, replication_index: int) -> 'SeedSpec':
        return SeedSpec(self.master_seed, replication_index)


def fresh_seed() -> int:
    """A new 63-bit master seed from OS entropy, for runs that did not name one."""
    return int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
