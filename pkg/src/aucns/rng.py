"""Named random substreams derived from a single experiment seed.

Every stochastic component (split, init, shuffle, sampler, eval) pulls its
own generator via `substream(seed, name)`, so reordering or skipping stages
never perturbs the randomness of the others.
"""

import zlib

import numpy as np

#: substream names used by the pipeline, fixed for reproducibility
STREAMS = ("split", "init", "shuffle", "sampler", "eval")


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a Generator keyed by (seed, name), stable across runs/platforms.

    The name is folded to an integer with crc32 (stable, unlike hash()) and
    combined with the seed in a SeedSequence.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), key)))
