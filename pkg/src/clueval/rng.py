"""Counter-based deterministic random streams shared by all stochastic components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngState:
    """Address of a reproducible random stream: a seed plus a derivation path.

    Streams are materialized from a Philox counter-based bit generator, so a
    given (seed, path) pair yields the same sequence on every run and
    platform.  Child states address independent streams without consuming
    anything from the parent, which is what keeps concurrent scoring from
    perturbing the stream used for batch sampling.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, index: int) -> "RngState":
        """Derive the independent substream at ``index`` under this state."""
        if index < 0:
            raise ValueError("child index must be nonnegative")
        return RngState(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        """Materialize the stream from its start.

        Calling twice returns two generators positioned at the same point,
        so materialize once per consumer.
        """
        ss = np.random.SeedSequence(entropy=self.seed & _MASK64, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))
