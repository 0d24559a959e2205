"""ELF header and section-header-table walking for 32/64-bit, both endians."""

from __future__ import annotations

import struct

from packlab.errors import MalformedHeader, Truncated

ELF_MAGIC = b"\x7fELF"

ELFCLASS32 = 1
ELFCLASS64 = 2
ELFDATA2LSB = 1
ELFDATA2MSB = 2

SHT_NULL = 0
SHT_NOBITS = 8

SHF_WRITE = 0x1
SHF_ALLOC = 0x2
SHF_EXECINSTR = 0x4

MAX_SECTIONS = 4096


def parse_elf(data: bytes):
    """Return (format, [Section], entry_file_offset_or_None)."""
    from packlab.binfmt import ExecFormat, Section

    size = len(data)
    if size < 16:
        raise Truncated("file too small for an ELF identification block")
    ei_class, ei_data = data[4], data[5]
    if ei_class == ELFCLASS32:
        fmt = ExecFormat.ELF32
    elif ei_class == ELFCLASS64:
        fmt = ExecFormat.ELF64
    else:
        raise MalformedHeader(f"bad ELF class {ei_class}")
    if ei_data == ELFDATA2LSB:
        end = "<"
    elif ei_data == ELFDATA2MSB:
        end = ">"
    else:
        raise MalformedHeader(f"bad ELF data encoding {ei_data}")

    is64 = fmt is ExecFormat.ELF64
    ehsize = 64 if is64 else 52
    if size < ehsize:
        raise Truncated("ELF header truncated")

    if is64:
        e_entry, _phoff, e_shoff = struct.unpack_from(end + "QQQ", data, 24)
        (e_shentsize, e_shnum, e_shstrndx) = struct.unpack_from(end + "HHH", data, 58)
    else:
        e_entry, _phoff, e_shoff = struct.unpack_from(end + "III", data, 24)
        (e_shentsize, e_shnum, e_shstrndx) = struct.unpack_from(end + "HHH", data, 46)

    sections = []
    spans = []  # (sh_addr, span, raw_offset, raw_size)
    if e_shoff and e_shnum:
        if e_shnum > MAX_SECTIONS:
            raise MalformedHeader(f"implausible section count {e_shnum}")
        min_entsize = 64 if is64 else 40
        if e_shentsize < min_entsize:
            raise MalformedHeader(f"section header entry size {e_shentsize} too small")
        if e_shoff + e_shnum * e_shentsize > size:
            raise Truncated("section header table beyond end of file")

        raw_headers = []
        for i in range(e_shnum):
            off = e_shoff + i * e_shentsize
            if is64:
                (sh_name, sh_type, sh_flags, sh_addr, sh_offset, sh_size) = (
                    struct.unpack_from(end + "IIQQQQ", data, off)
                )
            else:
                (sh_name, sh_type, sh_flags, sh_addr, sh_offset, sh_size) = (
                    struct.unpack_from(end + "IIIIII", data, off)
                )
            raw_headers.append((sh_name, sh_type, sh_flags, sh_addr, sh_offset, sh_size))

        strtab = b""
        if e_shstrndx < len(raw_headers):
            _, st_type, _, _, st_off, st_size = raw_headers[e_shstrndx]
            if st_type != SHT_NOBITS:
                if st_off + st_size > size:
                    raise Truncated("section name string table beyond end of file")
                strtab = data[st_off:st_off + st_size]

        for sh_name, sh_type, sh_flags, sh_addr, sh_offset, sh_size in raw_headers:
            if sh_type == SHT_NULL:
                continue
            raw_size = 0 if sh_type == SHT_NOBITS else sh_size
            if raw_size and sh_offset + raw_size > size:
                raise Truncated(
                    f"section raw range [{sh_offset}, {sh_offset + raw_size}) "
                    f"exceeds file size {size}"
                )
            sections.append(
                Section(
                    name=_strtab_name(strtab, sh_name),
                    raw_offset=sh_offset,
                    raw_size=raw_size,
                    virtual_size=sh_size,
                    executable=bool(sh_flags & SHF_EXECINSTR),
                    writable=bool(sh_flags & SHF_WRITE),
                    readable=bool(sh_flags & SHF_ALLOC),
                )
            )
            if sh_addr:
                spans.append((sh_addr, sh_size, sh_offset, raw_size))

    entry = _entry_offset(e_entry, spans)
    return fmt, sections, entry


def _strtab_name(strtab: bytes, index: int) -> bytes:
    if index >= len(strtab):
        return b""
    nul = strtab.find(b"\x00", index)
    if nul == -1:
        nul = len(strtab)
    return strtab[index:nul]


def _entry_offset(e_entry: int, spans) -> int | None:
    """Map the virtual entry address to a file offset via section spans."""
    if e_entry == 0:
        return None
    for addr, span, roff, rsize in spans:
        if span > 0 and addr <= e_entry < addr + span:
            delta = e_entry - addr
            if delta < rsize:
                return roff + delta
            return None
    return None
