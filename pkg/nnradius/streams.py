""" Reproducible random streams

All randomness in nnradius flows from one global seed. Each consumer derives
its own 64-bit stream seed from the tuple ``(seed, tag, cell, rep)``, so a
replication draws the same numbers no matter which worker runs it or in
which order.

The derived seed is the first eight bytes, read little endian, of the
BLAKE2b digest of the text ``"{seed}/{tag}/{cell}/{rep}"``.
"""

import hashlib

import numpy as np


GLOBAL_SEED = 20260504
""" Default global seed """

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, tag: str, cell: str = "", rep: int = 0) -> int:
    """ Derive an independent 64-bit stream seed

    :param seed: Global seed
    :param tag: Consumer name, like ``exp1`` or ``tailcheck``
    :param cell: Cell identifier within the consumer
    :param rep: Replication index
    :return: Unsigned 64-bit integer
    """
    text = f"{int(seed) & _MASK64}/{tag}/{cell}/{int(rep)}"
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def generator(seed: int) -> np.random.Generator:
    """ A PCG64 generator for a stream seed

    :param seed: Unsigned 64-bit stream seed
    :return: Fresh generator
    """
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def stream(seed: int, tag: str, cell: str = "",
           rep: int = 0) -> np.random.Generator:
    """ Shorthand for ``generator(derive_seed(...))`` """
    return generator(derive_seed(seed, tag, cell, rep))
