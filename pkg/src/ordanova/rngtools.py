"""Named random number streams.

Every stochastic operation in the package derives its generator from a root
seed plus a short label, so distinct operations sharing a root seed never
share a stream, and any single operation can be replayed in isolation.
"""

import hashlib

import numpy as np

__all__ = ["substream"]


def _label_key(label: str | int) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Return a PCG64 generator for the stream named by ``labels``.

    Labels may mix strings (operation names) and integers (chain or
    replicate indices). The same seed and labels always give the same
    stream, on every platform.
    """
    keys = tuple(_label_key(lab) for lab in labels)
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=keys)
    return np.random.Generator(np.random.PCG64(seq))
