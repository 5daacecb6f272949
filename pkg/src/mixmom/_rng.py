"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
user seed plus a small integer tag tuple, so any stream can be reproduced in
isolation without consuming another. Stream tags in use:

    (0,)            mixture labels for a sample of size p
    (1, j, i)       coordinate i of component j (data draws)
    (2, k)          protocol parameter draws, k enumerates the draw site
    (3, 0)          fit initialization
    (3, 1)          warm-up row permutations
"""

import numpy as np

LABELS = 0
COORD = 1
PARAMS = 2
FIT = 3


def stream(seed, *tag):
    """Independent Generator for (seed, tag); same inputs give identical draws."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tag))
    return np.random.Generator(np.random.Philox(ss))
