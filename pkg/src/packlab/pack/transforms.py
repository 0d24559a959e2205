"""Built-in packing transformations.

These emulate the observable static effects of real packers (rename and
compress sections, encode payloads, append a stub, strip the overlay)
without shipping or running third-party tools, so generated ground
truths stay hermetic and reproducible. Each transform mutates a
:class:`LayoutPlan` in place and appends an entry to its journal.
"""

from __future__ import annotations

import hashlib
import random
import zlib

from packlab.errors import PackingFailed
from packlab.pack.layout import LayoutPlan, SectionPlan

STUB_SIZE = 4096
NAME_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"

# sections that typically survive packing untouched (resources)
RESOURCE_NAMES = {b".rsrc", b".resources"}

__all__ = [
    "compress_sections",
    "xor_encode_sections",
    "append_stub",
    "strip_overlay",
    "stub_marker",
    "BUILTIN_TRANSFORMS",
]


def _random_name(rng: random.Random) -> bytes:
    return ("." + "".join(rng.choice(NAME_ALPHABET) for _ in range(7))).encode()


def compress_sections(
    plan: LayoutPlan,
    rng: random.Random,
    level: int = 6,
    keep_resources: bool = True,
) -> None:
    """Deflate every section payload and give it a random name.

    Original names and payload hashes go to the journal so the inverse
    is checkable (inflate must recover the original bytes).
    """
    if not (1 <= level <= 9):
        raise PackingFailed(f"deflate level {level} out of range")
    for idx, sec in enumerate(plan.sections):
        if keep_resources and sec.name in RESOURCE_NAMES:
            continue
        if not sec.data:
            continue
        new_name = _random_name(rng)
        plan.journal.append({
            "step": "compress_sections",
            "index": idx,
            "original_name": sec.name.decode("latin-1"),
            "new_name": new_name.decode("latin-1"),
            "codec": "deflate",
            "original_sha256": hashlib.sha256(sec.data).hexdigest(),
        })
        sec.data = zlib.compress(sec.data, level)
        sec.name = new_name


def xor_encode_sections(plan: LayoutPlan, rng: random.Random, key: int = 1) -> None:
    """XOR every section byte with a single-byte key.

    Key 0 is the identity and would mislabel ground truth, so it is
    rejected.
    """
    if not (1 <= key <= 255):
        raise PackingFailed("XOR key must be a non-zero byte")
    for idx, sec in enumerate(plan.sections):
        if not sec.data:
            continue
        sec.data = bytes(b ^ key for b in sec.data)
        plan.journal.append({
            "step": "xor_encode_sections", "index": idx, "key": key,
        })


def stub_marker(packer_name: str) -> bytes:
    """Deterministic 4-byte tag planted in every stub of a packer.

    Lets an entry-point signature name the packer that produced a
    sample.
    """
    return hashlib.sha256(packer_name.encode()).digest()[:4]


def append_stub(
    plan: LayoutPlan,
    rng: random.Random,
    size: int = STUB_SIZE,
    marker: bytes = b"",
) -> None:
    """Add one high-entropy pseudo-stub section and move the entry into it.

    The stub starts with a short unpacker-like prologue followed by the
    packer marker, then seeded random bytes.
    """
    if size < 64:
        raise PackingFailed(f"stub size {size} too small")
    prologue = b"\x60\xe8" + rng.randbytes(4) + b"\x5d"
    body_len = size - len(prologue) - len(marker)
    body = rng.randbytes(body_len)
    plan.sections.append(SectionPlan(
        name=_random_name(rng),
        data=prologue + marker + body,
        executable=True,
        writable=True,
        readable=True,
    ))
    plan.entry_in(len(plan.sections) - 1, 0)
    plan.journal.append({"step": "append_stub", "size": size})


def strip_overlay(plan: LayoutPlan, rng: random.Random) -> None:
    """Drop everything after the last section's raw range."""
    plan.journal.append({"step": "strip_overlay", "removed": len(plan.overlay)})
    plan.overlay = b""


BUILTIN_TRANSFORMS = {
    "compress_sections": compress_sections,
    "xor_encode_sections": xor_encode_sections,
    "append_stub": append_stub,
    "strip_overlay": strip_overlay,
}
