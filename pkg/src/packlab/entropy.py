"""Shannon block entropy over executables.

Entropy is measured in bits per byte over the 256-symbol byte histogram,
so values live in [0, 8]. The packed/not-packed decision applies two
thresholds: one on the average block entropy, one on the highest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from packlab.binfmt import Executable
from packlab.errors import BlockSizeTooSmall, EmptyInput

DEFAULT_BLOCK_SIZE = 256  # bytes per block
MIN_BLOCK_SIZE = 16

# Decision thresholds on (average, highest) block entropy. Exposed as
# configuration defaults only; callers can and do override them.
DEFAULT_AVG_THRESHOLD = 6.677
DEFAULT_MAX_THRESHOLD = 7.199

__all__ = [
    "EntropyProfile",
    "shannon",
    "block_entropies",
    "profile",
    "bintropy_decide",
    "DEFAULT_BLOCK_SIZE",
    "DEFAULT_AVG_THRESHOLD",
    "DEFAULT_MAX_THRESHOLD",
]


def shannon(data: bytes) -> float:
    """Shannon entropy of a byte sequence in bits/byte.

    Exactly 0 for constant input and exactly 8 only when all 256 values
    are equally frequent.
    """
    if len(data) == 0:
        raise EmptyInput("cannot compute entropy of empty input")
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    probs = counts[counts > 0] / len(data)
    if len(probs) == 1:
        return 0.0
    return float(-(probs * np.log2(probs)).sum())


def block_entropies(
    data: bytes,
    block_size: int = DEFAULT_BLOCK_SIZE,
    min_tail_fraction: float = 0.5,
) -> list[float]:
    """Entropy of consecutive fixed-size blocks.

    A trailing partial block is kept only when its length reaches
    ``min_tail_fraction`` of the block size; tiny remainders would
    otherwise contribute spurious low-entropy samples.
    """
    if len(data) == 0:
        raise EmptyInput("cannot block-score empty input")
    if block_size < MIN_BLOCK_SIZE:
        raise BlockSizeTooSmall(f"block size {block_size} < {MIN_BLOCK_SIZE}")
    values = []
    for start in range(0, len(data), block_size):
        block = data[start:start + block_size]
        if len(block) < block_size and len(block) < block_size * min_tail_fraction:
            break
        values.append(shannon(block))
    if not values:
        # whole input shorter than the tail cutoff: score it as one block
        values.append(shannon(data))
    return values


@dataclass
class EntropyProfile:
    """Block-entropy summary of a whole file and of each section."""

    block_size: int
    blocks: list[float]
    average: float
    highest: float
    per_section: dict[str, tuple[float, float]] = field(default_factory=dict)


def profile(exe: Executable, block_size: int = DEFAULT_BLOCK_SIZE) -> EntropyProfile:
    """Whole-file block entropies plus per-section (average, highest).

    Sections with no raw bytes are skipped. Duplicate section names are
    disambiguated with an ``@index`` suffix so no section is dropped.
    """
    blocks = block_entropies(exe.data, block_size)
    per_section: dict[str, tuple[float, float]] = {}
    for idx, sec in enumerate(exe.sections):
        if sec.raw_size == 0:
            continue
        values = block_entropies(exe.data[sec.raw_offset:sec.raw_end], block_size)
        key = sec.display_name
        if key in per_section:
            key = f"{key}@{idx}"
        per_section[key] = (float(np.mean(values)), float(max(values)))
    return EntropyProfile(
        block_size=block_size,
        blocks=blocks,
        average=float(np.mean(blocks)),
        highest=float(max(blocks)),
        per_section=per_section,
    )


def bintropy_decide(
    prof: EntropyProfile,
    avg_threshold: float = DEFAULT_AVG_THRESHOLD,
    max_threshold: float = DEFAULT_MAX_THRESHOLD,
) -> bool:
    """True when both the average and the highest block entropy exceed
    their thresholds."""
    if not (0 < avg_threshold < 8 and 0 < max_threshold < 8):
        raise ValueError("thresholds must lie in (0, 8)")
    return prof.average > avg_threshold and prof.highest > max_threshold
