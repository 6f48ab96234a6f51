"""Counter-based random streams keyed by simulation coordinates.

Every random draw in a run comes from a Philox generator whose key is derived
from ``(seed, domain, *coordinates)``. A batch's counts therefore depend only on
which batch it is, never on how many draws happened before it, so trials can
run in any order or on any number of workers.
"""

import zlib

import numpy as np

COUNTS = 1
JITTER = 2
CALIBRATION = 3
ANALYSIS = 4


def label_key(label):
    """Stable non-negative integer for a preparation label or token."""
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed, domain, *coords):
    key = (domain,) + tuple(int(c) for c in coords)
    seq = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
