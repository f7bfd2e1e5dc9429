"""Reproducible random number streams keyed by (master_seed, stream_id)."""

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np


@dataclass
class RngStream:
    """
    A private random stream.

    Distinct (master_seed, stream_id) pairs give independent streams through
    numpy's SeedSequence; the same pair always replays identically.
    """

    master_seed: int
    stream_id: int
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seed_sequence = np.random.SeedSequence([self.master_seed, self.stream_id])
        self.generator = np.random.default_rng(seed_sequence)

    def uniform(self, size: Optional[Union[int, Tuple[int, ...]]] = None):
        """Uniform draws on [0, 1)."""
        return self.generator.random(size)

