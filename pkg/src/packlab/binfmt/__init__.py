"""Uniform structural view of PE and ELF executables.

Only headers and the section table are interpreted: enough to know where
sections live in the file, where execution starts, and what trails the
last section (the overlay). Imports, exports and relocations are out of
scope on purpose.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from packlab.errors import FileTooLarge, UnknownFormat

MAX_FILE_SIZE = 64 * 1024 * 1024  # parser refuses anything larger

__all__ = [
    "ExecFormat",
    "Section",
    "Executable",
    "parse",
    "overlay_of",
    "entry_section",
    "MAX_FILE_SIZE",
]


class ExecFormat(str, Enum):
    PE32 = "PE32"
    PE64 = "PE64"
    ELF32 = "ELF32"
    ELF64 = "ELF64"

    @property
    def family(self) -> str:
        """Format family: ``PE`` or ``ELF``."""
        return self.value[:-2]

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class Section:
    """One section-table entry, file-side view.

    ``name`` keeps the raw bytes (trailing NULs stripped); packed samples
    routinely carry non-printable names.
    """

    name: bytes
    raw_offset: int
    raw_size: int
    virtual_size: int
    executable: bool = False
    writable: bool = False
    readable: bool = False

    @property
    def raw_end(self) -> int:
        return self.raw_offset + self.raw_size

    @property
    def display_name(self) -> str:
        """Printable form of the raw name (latin-1, escapes preserved)."""
        return self.name.decode("latin-1", errors="replace")

    def contains_offset(self, offset: int) -> bool:
        return self.raw_size > 0 and self.raw_offset <= offset < self.raw_end


@dataclass(frozen=True)
class Executable:
    """Parsed executable: immutable, safe to share between threads."""

    format: ExecFormat
    data: bytes
    sections: tuple[Section, ...]
    entry_point: int | None  # file offset, None when unmapped/absent
    overlay: tuple[int, int]  # (start, length)
    sha256: str = field(default="")
    size: int = field(default=0)

    @property
    def overlay_start(self) -> int:
        return self.overlay[0]

    @property
    def overlay_size(self) -> int:
        return self.overlay[1]


def parse(data: bytes) -> Executable:
    """Parse raw bytes into an :class:`Executable`.

    Dispatches on magic bytes; never guesses. Read-only and deterministic.

    Raises:
        UnknownFormat: no recognized magic.
        Truncated: a header points past the end of the file.
        MalformedHeader: internally inconsistent header fields.
        FileTooLarge: input exceeds :data:`MAX_FILE_SIZE`.
    """
    if not data:
        raise UnknownFormat("empty input")
    if len(data) > MAX_FILE_SIZE:
        raise FileTooLarge(f"{len(data)} bytes exceeds the {MAX_FILE_SIZE}-byte cap")

    from packlab.binfmt import elf, pe

    if data[:4] == elf.ELF_MAGIC:
        fmt, sections, entry = elf.parse_elf(data)
    elif data[:2] == pe.MZ_MAGIC:
        fmt, sections, entry = pe.parse_pe(data)
    else:
        raise UnknownFormat("no PE or ELF magic found")

    sections = tuple(sorted(sections, key=lambda s: (s.raw_offset, s.raw_end)))
    overlay = _compute_overlay(sections, len(data))
    return Executable(
        format=fmt,
        data=data,
        sections=sections,
        entry_point=entry,
        overlay=overlay,
        sha256=hashlib.sha256(data).hexdigest(),
        size=len(data),
    )


def parse_file(path) -> Executable:
    """Read and parse a file from disk."""
    with open(path, "rb") as fh:
        return parse(fh.read())


def _compute_overlay(sections: tuple[Section, ...], size: int) -> tuple[int, int]:
    # Bytes past the last raw section range are unreferenced by the
    # section table; with no sections at all the whole file counts.
    start = max((s.raw_end for s in sections), default=0)
    start = min(start, size)
    return (start, size - start)


def overlay_of(exe: Executable) -> tuple[int, int]:
    """(start, length) of the data trailing the last section."""
    return exe.overlay


def entry_section(exe: Executable) -> Section | None:
    """Section whose raw range contains the entry point, if any.

    Returns None for a missing entry point or one that lands outside
    every section (header-only entry): that situation is a detection
    signal, not an error.
    """
    if exe.entry_point is None:
        return None
    for sec in exe.sections:
        if sec.contains_offset(exe.entry_point):
            return sec
    return None
