"""Counter-based seed derivation and Gaussian streams.

Every replicate of every experiment gets its own 64-bit seed, derived from
``(master, stream_tag, replicate)``.  The seed keys a Philox generator (a
counter-based PRNG) so streams never overlap regardless of how replicates
are distributed across workers.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError

MASK64 = (1 << 64) - 1

# Stream tags.  Tags with the high bit set belong to the eta domain, so a
# path seed can never coincide with an eta seed for the same replicate.
ETA_BIT = 1 << 31
PATH_TAG = 1
ETA_TAG = PATH_TAG | ETA_BIT
AUX_TAG = 2


def _splitmix_finalize(z: int) -> int:
    # bijection on 64-bit words
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream_tag: int, replicate: int) -> int:
    """64-bit seed for one replicate of one stream.

    For a fixed ``master`` the map ``(stream_tag, replicate) -> seed`` is
    injective on ``stream_tag < 2**32`` and ``replicate < 2**32``: the pair is
    packed into one 64-bit word, offset by a hash of the master seed, and
    pushed through the splitmix64 finalizer, which is a bijection.
    """
    if not 0 <= stream_tag < 1 << 32:
        raise ConfigError(f"stream_tag must be in [0, 2**32), got {stream_tag}")
    if not 0 <= replicate < 1 << 32:
        raise ConfigError(f"replicate must be in [0, 2**32), got {replicate}")
    offset = _splitmix_finalize((int(master) & MASK64) ^ 0x9E3779B97F4A7C15)
    word = ((stream_tag << 32) | replicate) ^ offset
    return _splitmix_finalize(word)


def level_tag(base_tag: int, level: int) -> int:
    """Tag for the ``level``-th grid size of a sweep, keeping the eta bit."""
    if not 0 <= level < 1 << 15:
        raise ConfigError("sweep level out of range")
    return base_tag | (level << 16)


def standard_normals(seed: int, size: int) -> np.ndarray:
    """``size`` standard normal variates from the Philox stream keyed by ``seed``.

    Uses the inverse-CDF transform of 53-bit uniforms shifted to the open
    interval, so the output is identical on every platform.
    """
    bitgen = np.random.Philox(key=int(seed) & MASK64)
    raw = bitgen.random_raw(size) >> np.uint64(11)
    u = (raw.astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)
