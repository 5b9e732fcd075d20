"""
Counter-based random streams.

Every draw in the package goes through ``substream(seed, tag, *key)``: a Philox
generator keyed by the SeedSequence of ``(seed, tag, *key)``. Streams with
different keys are independent, and the same key always replays the same
numbers, so a grand coupling can hand the identical uniform to any number of
chains at a revelation position.
"""
import numpy as np

# Stream tags.
FIELD = 1
GLAUBER = 2
COUPLING = 3
PERCOLATION = 4
NOISING = 5
ORACLE_SAMPLE = 6
SL_NOISE = 7
ORDERING = 8
INCREMENTAL = 9
EXPERIMENT = 10
MLSI = 11
PINNING = 12
GALTON_WATSON = 13


def substream(seed, tag, *key):
    entropy = [int(seed), int(tag), *(int(k) for k in key)]
    if any(e < 0 for e in entropy):
        raise ValueError("seeds and stream keys must be non-negative integers")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def shared_uniforms(seed, tag, count, *key):
    """The uniforms U_0..U_{count-1} of one stream; position i always gets the same value."""
    return substream(seed, tag, *key).random(count)


def child_seed(seed, tag, *key):
    """Derive an integer seed for a nested computation."""
    return int(substream(seed, tag, *key).integers(0, 2**63 - 1))
