"""Editable file layout and simplified PE/ELF writers.

Transforms operate on a :class:`LayoutPlan` extracted from a parsed
executable, then the plan is serialized back into a structurally valid
file of the same format. Emitted layouts are simplified (no import
tables, no program headers) but always re-parse cleanly; they are not
meant to run.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

from packlab.binfmt import ExecFormat, Executable, entry_section
from packlab.binfmt import pe as pe_const

FILE_ALIGN = 0x200
SECTION_ALIGN = 0x1000

__all__ = ["SectionPlan", "LayoutPlan", "layout_of", "build", "build_pe", "build_elf"]


@dataclass
class SectionPlan:
    """Section payload plus the attributes the writers need."""

    name: bytes
    data: bytes
    virtual_size: int = 0
    executable: bool = False
    writable: bool = False
    readable: bool = True

    def sized(self) -> "SectionPlan":
        if self.virtual_size == 0:
            return replace(self, virtual_size=len(self.data))
        return self


@dataclass
class LayoutPlan:
    """Mutable picture of a binary: sections, entry target, overlay."""

    format: ExecFormat
    sections: list[SectionPlan]
    entry: tuple[int, int] | None  # (section index, offset within payload)
    overlay: bytes = b""
    journal: list[dict] = field(default_factory=list)

    def entry_in(self, index: int, delta: int = 0) -> None:
        self.entry = (index, delta)


def layout_of(exe: Executable) -> LayoutPlan:
    """Extract an editable plan from a parsed executable.

    The ELF section-name string table is metadata, not payload; it is
    dropped here and regenerated by the writer.
    """
    kept = [
        s for s in exe.sections
        if not (exe.format.family == "ELF" and s.name == b".shstrtab")
    ]
    sections = [
        SectionPlan(
            name=s.name,
            data=exe.data[s.raw_offset:s.raw_end],
            virtual_size=s.virtual_size,
            executable=s.executable,
            writable=s.writable,
            readable=s.readable,
        )
        for s in kept
    ]
    entry = None
    esec = entry_section(exe)
    if esec is not None and esec in kept:
        idx = kept.index(esec)
        entry = (idx, exe.entry_point - esec.raw_offset)
    start, length = exe.overlay
    return LayoutPlan(
        format=exe.format,
        sections=sections,
        entry=entry,
        overlay=exe.data[start:start + length],
    )


def build(plan: LayoutPlan) -> bytes:
    if plan.format in (ExecFormat.PE32, ExecFormat.PE64):
        return build_pe(plan)
    return build_elf(plan)


def _align(value: int, alignment: int) -> int:
    return (value + alignment - 1) // alignment * alignment


# -- PE -----------------------------------------------------------------------

def build_pe(plan: LayoutPlan) -> bytes:
    """Serialize a plan as PE32/PE64: DOS stub, COFF + optional header,
    section table, payloads at file-aligned offsets, then the overlay."""
    is64 = plan.format is ExecFormat.PE64
    sections = [s.sized() for s in plan.sections]
    n = len(sections)

    opt_size = 240 if is64 else 224  # standard fields + windows fields + 16 dirs
    headers_size = 64 + 4 + pe_const.COFF_HEADER_SIZE + opt_size + n * 40
    headers_end = _align(headers_size, FILE_ALIGN)

    # assign raw offsets and virtual addresses
    raw_cursor = headers_end
    va_cursor = SECTION_ALIGN
    raws, vas = [], []
    for sec in sections:
        raws.append(raw_cursor if sec.data else 0)
        vas.append(va_cursor)
        raw_cursor = _align(raw_cursor + len(sec.data), FILE_ALIGN) if sec.data else raw_cursor
        va_cursor = _align(va_cursor + max(sec.virtual_size, len(sec.data), 1), SECTION_ALIGN)

    entry_rva = 0
    if plan.entry is not None:
        idx, delta = plan.entry
        entry_rva = vas[idx] + delta

    out = bytearray()
    # DOS header: magic + e_lfanew pointing right behind it
    dos = bytearray(64)
    dos[:2] = pe_const.MZ_MAGIC
    struct.pack_into("<I", dos, pe_const.E_LFANEW_OFFSET, 64)
    out += dos
    out += pe_const.PE_MAGIC

    machine = 0x8664 if is64 else 0x14C
    characteristics = 0x0022 if is64 else 0x0102
    out += struct.pack("<HHIIIHH", machine, n, 0, 0, 0, opt_size, characteristics)

    image_size = _align(va_cursor, SECTION_ALIGN)
    if is64:
        out += struct.pack(
            "<HBBIIIII",
            pe_const.PE64_MAGIC, 14, 0, 0, 0, 0, entry_rva, SECTION_ALIGN,
        )
        out += struct.pack(
            "<QIIHHHHHHIIIIHHQQQQII",
            0x140000000, SECTION_ALIGN, FILE_ALIGN,
            6, 0, 0, 0, 6, 0, 0,
            image_size, headers_end, 0, 3, 0,
            0x100000, 0x1000, 0x100000, 0x1000, 0, 16,
        )
    else:
        out += struct.pack(
            "<HBBIIIIII",
            pe_const.PE32_MAGIC, 14, 0, 0, 0, 0, entry_rva, SECTION_ALIGN, 0,
        )
        out += struct.pack(
            "<IIIHHHHHHIIIIHHIIIIII",
            0x400000, SECTION_ALIGN, FILE_ALIGN,
            6, 0, 0, 0, 6, 0, 0,
            image_size, headers_end, 0, 3, 0,
            0x100000, 0x1000, 0x100000, 0x1000, 0, 16,
        )
    out += b"\x00" * 128  # 16 empty data directories

    for sec, roff, va in zip(sections, raws, vas):
        chars = 0
        if sec.executable:
            chars |= pe_const.IMAGE_SCN_MEM_EXECUTE | 0x20
        if sec.writable:
            chars |= pe_const.IMAGE_SCN_MEM_WRITE
        if sec.readable:
            chars |= pe_const.IMAGE_SCN_MEM_READ
        out += struct.pack(
            "<8sIIIIIIHHI",
            sec.name[:8], sec.virtual_size, va, len(sec.data), roff, 0, 0, 0, 0, chars,
        )

    for sec, roff in zip(sections, raws):
        if not sec.data:
            continue
        out += b"\x00" * (roff - len(out))
        out += sec.data
    out += plan.overlay
    return bytes(out)


# -- ELF ----------------------------------------------------------------------

ELF_BASE_VA = 0x400000


def build_elf(plan: LayoutPlan) -> bytes:
    """Serialize a plan as ELF32/ELF64.

    The section header table and .shstrtab are placed right after the
    ELF header, before any payload, so the bytes after the last section
    are genuinely unreferenced (a true overlay).
    """
    is64 = plan.format is ExecFormat.ELF64
    sections = [s.sized() for s in plan.sections]

    ehsize = 64 if is64 else 52
    shentsize = 64 if is64 else 40
    n_headers = len(sections) + 2  # NULL + payload sections + .shstrtab

    strtab = bytearray(b"\x00")
    name_offsets = []
    for sec in sections:
        name_offsets.append(len(strtab))
        strtab += sec.name + b"\x00"
    shstrtab_name_off = len(strtab)
    strtab += b".shstrtab\x00"

    shoff = ehsize
    strtab_off = shoff + n_headers * shentsize
    payload_cursor = _align(strtab_off + len(strtab), 16)

    offsets, vas = [], []
    va_cursor = ELF_BASE_VA
    for sec in sections:
        offsets.append(payload_cursor)
        vas.append(va_cursor)
        payload_cursor = _align(payload_cursor + len(sec.data), 16)
        va_cursor = _align(va_cursor + max(sec.virtual_size, len(sec.data), 1), 16)

    e_entry = 0
    if plan.entry is not None:
        idx, delta = plan.entry
        e_entry = vas[idx] + delta

    machine = 62 if is64 else 3  # x86-64 / i386
    out = bytearray()
    out += b"\x7fELF" + bytes([2 if is64 else 1, 1, 1]) + b"\x00" * 9
    if is64:
        out += struct.pack("<HHIQQQIHHHHHH", 2, machine, 1, e_entry, 0, shoff,
                           0, ehsize, 0, 0, shentsize, n_headers, n_headers - 1)
    else:
        out += struct.pack("<HHIIIIIHHHHHH", 2, machine, 1, e_entry, 0, shoff,
                           0, ehsize, 0, 0, shentsize, n_headers, n_headers - 1)

    def shdr(name_off, sh_type, flags, addr, offset, size):
        if is64:
            return struct.pack("<IIQQQQIIQQ", name_off, sh_type, flags, addr,
                               offset, size, 0, 0, 16, 0)
        return struct.pack("<IIIIIIIIII", name_off, sh_type, flags, addr,
                           offset, size, 0, 0, 16, 0)

    out += shdr(0, 0, 0, 0, 0, 0)  # SHT_NULL
    for sec, name_off, off, va in zip(sections, name_offsets, offsets, vas):
        flags = 0x2  # SHF_ALLOC
        if sec.executable:
            flags |= 0x4
        if sec.writable:
            flags |= 0x1
        if not sec.data and sec.virtual_size > 0:
            # virtual-only section: NOBITS keeps the size without raw bytes
            out += shdr(name_off, 8, flags, va, off, sec.virtual_size)
        else:
            out += shdr(name_off, 1, flags, va, off, len(sec.data))
    out += shdr(shstrtab_name_off, 3, 0, 0, strtab_off, len(strtab))

    out += strtab
    for sec, off in zip(sections, offsets):
        out += b"\x00" * (off - len(out))
        out += sec.data
    out += plan.overlay
    return bytes(out)
