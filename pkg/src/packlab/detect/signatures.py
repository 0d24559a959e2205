"""Byte-pattern signatures with single-byte wildcards.

Database format, one signature per line::

    ; comment
    LABEL = 60 E8 ?? ?? ?? ?? 5D ep_only

``??`` matches exactly one arbitrary byte. The trailing ``ep_only``
keyword anchors the pattern at the entry-point file offset; without it
the whole file is scanned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from packlab.binfmt import Executable
from packlab.errors import BadSignature

MAX_PATTERN_TOKENS = 256

__all__ = ["Signature", "parse_signature_line", "load_signatures", "match_signatures"]


@dataclass(frozen=True)
class Signature:
    packer_label: str
    pattern: tuple[int | None, ...]  # None is the one-byte wildcard
    ep_only: bool = False

    def __post_init__(self):
        if not self.pattern:
            raise BadSignature(f"{self.packer_label}: empty pattern")
        if len(self.pattern) > MAX_PATTERN_TOKENS:
            raise BadSignature(
                f"{self.packer_label}: pattern longer than {MAX_PATTERN_TOKENS} tokens"
            )

    @cached_property
    def regex(self) -> re.Pattern[bytes]:
        return re.compile(
            b"".join(
                b"." if tok is None else re.escape(bytes([tok]))
                for tok in self.pattern
            ),
            re.DOTALL,
        )

    def matches_at(self, data: bytes, offset: int) -> bool:
        return self.regex.match(data, offset) is not None and (
            offset + len(self.pattern) <= len(data)
        )

    def search(self, data: bytes) -> bool:
        return self.regex.search(data) is not None


def parse_signature_line(line: str) -> Signature | None:
    """Parse one DB line; comments and blanks yield None."""
    body = line.split(";", 1)[0].strip()
    if not body:
        return None
    if "=" not in body:
        raise BadSignature(f"missing '=' in line: {line.strip()!r}")
    label, rhs = body.split("=", 1)
    label = label.strip()
    tokens = rhs.split()
    ep_only = False
    if tokens and tokens[-1].lower() == "ep_only":
        ep_only = True
        tokens = tokens[:-1]
    if not label or not tokens:
        raise BadSignature(f"incomplete signature line: {line.strip()!r}")
    pattern: list[int | None] = []
    for tok in tokens:
        if tok == "??":
            pattern.append(None)
        else:
            try:
                pattern.append(int(tok, 16))
            except ValueError:
                raise BadSignature(f"bad token {tok!r} in line: {line.strip()!r}")
            if not 0 <= pattern[-1] <= 255:
                raise BadSignature(f"token {tok!r} out of byte range")
    return Signature(packer_label=label, pattern=tuple(pattern), ep_only=ep_only)


def load_signatures(path) -> list[Signature]:
    sigs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        sig = parse_signature_line(line)
        if sig is not None:
            sigs.append(sig)
    return sigs


def match_signatures(db: list[Signature], exe: Executable) -> list[str]:
    """Labels of matching signatures, in database order, deduplicated.

    Entry-point signatures are skipped (not an error) when the sample
    has no mapped entry point.
    """
    found: list[str] = []
    seen: set[str] = set()
    for sig in db:
        if sig.ep_only:
            if exe.entry_point is None:
                continue
            hit = sig.matches_at(exe.data, exe.entry_point)
        else:
            hit = sig.search(exe.data)
        if hit and sig.packer_label not in seen:
            seen.add(sig.packer_label)
            found.append(sig.packer_label)
    return found
