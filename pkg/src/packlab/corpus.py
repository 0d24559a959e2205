"""Synthetic clean executables for ground-truth generation and tests.

Samples imitate ordinary unpacked programs: a code-like .text section of
moderate entropy, a data section, read-only resources, and sometimes a
low-entropy overlay. They parse cleanly, carry an entry point inside
.text, and are fully determined by (format, seed).
"""

from __future__ import annotations

import random

from packlab.binfmt import ExecFormat
from packlab.pack.layout import LayoutPlan, SectionPlan, build

_WORDS = (
    "the quick brown fox jumps over a lazy dog while careful engineers "
    "measure entropy of sections and keep binaries honest small fast and "
    "boring data tables hold names values offsets flags and plain text"
).split()

# x86-ish prologue/epilogue fragments to salt the fake code
_OPCODES = [
    b"\x55\x89\xe5", b"\x48\x89\x5c\x24\x08", b"\x8b\x45\x08", b"\xc3",
    b"\x31\xc0", b"\xe8\x00\x00\x00\x00", b"\x83\xec\x20", b"\x5d\xc3",
]


def _textlike(rng: random.Random, size: int) -> bytes:
    parts = []
    total = 0
    while total < size:
        chunk = rng.choice(_WORDS).encode() + b" "
        parts.append(chunk)
        total += len(chunk)
    return b"".join(parts)[:size]


def _codelike(rng: random.Random, size: int) -> bytes:
    # opcode fragments with varied immediates: entropy and compressibility
    # in the ballpark of real .text sections
    parts = []
    total = 0
    while total < size:
        chunk = rng.choice(_OPCODES) + rng.randbytes(rng.randrange(1, 4))
        parts.append(chunk)
        total += len(chunk)
    return b"".join(parts)[:size]


def generate_clean(
    format: ExecFormat | str = ExecFormat.PE32,
    seed: int = 0,
    size_hint: int | None = None,
    overlay_probability: float = 0.25,
) -> bytes:
    """Build one clean sample; ``size_hint`` steers the total size."""
    fmt = ExecFormat(format)
    rng = random.Random(f"{seed}:{fmt.value}")
    base = size_hint if size_hint is not None else rng.randrange(24576, 98304)
    base = max(base, 2048)

    rsrc = _textlike(rng, rng.randrange(256, 1024))
    text = _codelike(rng, int(base * 0.62))
    data = _textlike(rng, max(base - len(text) - len(rsrc), 512))
    resource_name = b".rsrc" if fmt.family == "PE" else b".rodata"

    overlay = b""
    if rng.random() < overlay_probability:
        overlay = _textlike(rng, rng.randrange(512, 4096))

    plan = LayoutPlan(
        format=fmt,
        sections=[
            SectionPlan(name=b".text", data=text, executable=True, readable=True),
            SectionPlan(name=b".data", data=data, writable=True, readable=True),
            SectionPlan(name=resource_name, data=rsrc, readable=True),
        ],
        entry=(0, rng.randrange(0, max(len(text) // 2, 1))),
        overlay=overlay,
    )
    return build(plan)


def generate_pool(
    count: int,
    format: ExecFormat | str = ExecFormat.PE32,
    seed: int = 0,
    size_hint: int | None = None,
) -> list[bytes]:
    """A deterministic list of distinct clean samples."""
    return [
        generate_clean(format, seed=(seed * 1_000_003 + i), size_hint=size_hint)
        for i in range(count)
    ]
