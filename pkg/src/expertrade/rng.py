"""Named random substreams derived from one root seed.

Each stage draws from its own stream so enabling or disabling one stage
never shifts another stage's numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def substream_seed(root: int, name: str) -> int:
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFFFFFFFFFF, _name_key(name)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def substream(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(root, name))
