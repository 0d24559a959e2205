"""PE header walking: DOS stub -> COFF -> optional header -> section table.

struct-based, no third-party parser. Only the fields the toolkit needs are
read; anything inconsistent raises instead of being patched up.
"""

from __future__ import annotations

import struct

from packlab.errors import MalformedHeader, Truncated, UnknownFormat

MZ_MAGIC = b"MZ"
PE_MAGIC = b"PE\x00\x00"
E_LFANEW_OFFSET = 0x3C

PE32_MAGIC = 0x10B
PE64_MAGIC = 0x20B

SECTION_HEADER_SIZE = 40
COFF_HEADER_SIZE = 20

IMAGE_SCN_MEM_EXECUTE = 0x20000000
IMAGE_SCN_MEM_READ = 0x40000000
IMAGE_SCN_MEM_WRITE = 0x80000000

# sanity cap; the field is u16 anyway but a huge count on a small file
# is always a lie
MAX_SECTIONS = 2048


def parse_pe(data: bytes):
    """Return (format, [Section], entry_file_offset_or_None)."""
    from packlab.binfmt import ExecFormat, Section

    size = len(data)
    if size < E_LFANEW_OFFSET + 4:
        raise Truncated("file too small for a DOS header")
    (e_lfanew,) = struct.unpack_from("<I", data, E_LFANEW_OFFSET)
    if e_lfanew + 4 > size:
        raise Truncated("e_lfanew points past end of file")
    if data[e_lfanew:e_lfanew + 4] != PE_MAGIC:
        raise UnknownFormat("MZ file without PE signature")

    coff_off = e_lfanew + 4
    if coff_off + COFF_HEADER_SIZE > size:
        raise Truncated("COFF header beyond end of file")
    machine, n_sections, _ts, _symoff, _nsyms, opt_size, _chars = struct.unpack_from(
        "<HHIIIHH", data, coff_off
    )
    if n_sections > MAX_SECTIONS:
        raise MalformedHeader(f"implausible section count {n_sections}")

    opt_off = coff_off + COFF_HEADER_SIZE
    if opt_size < 2 or opt_off + opt_size > size:
        raise Truncated("optional header beyond end of file")
    (opt_magic,) = struct.unpack_from("<H", data, opt_off)
    if opt_magic == PE32_MAGIC:
        fmt = ExecFormat.PE32
    elif opt_magic == PE64_MAGIC:
        fmt = ExecFormat.PE64
    else:
        raise MalformedHeader(f"unknown optional header magic 0x{opt_magic:x}")
    # AddressOfEntryPoint sits at the same spot in both layouts
    if opt_off + 20 > size:
        raise Truncated("optional header standard fields truncated")
    (entry_rva,) = struct.unpack_from("<I", data, opt_off + 16)

    table_off = opt_off + opt_size
    table_end = table_off + n_sections * SECTION_HEADER_SIZE
    if table_end > size:
        raise Truncated("section table beyond end of file")

    sections = []
    spans = []  # (virtual_address, virtual_span, raw_offset, raw_size)
    for i in range(n_sections):
        off = table_off + i * SECTION_HEADER_SIZE
        raw_name = data[off:off + 8].rstrip(b"\x00")
        vsize, vaddr, rsize, roff = struct.unpack_from("<IIII", data, off + 8)
        (chars,) = struct.unpack_from("<I", data, off + 36)
        if roff + rsize > size:
            raise Truncated(
                f"section {raw_name!r} raw range [{roff}, {roff + rsize}) "
                f"exceeds file size {size}"
            )
        sections.append(
            Section(
                name=raw_name,
                raw_offset=roff,
                raw_size=rsize,
                virtual_size=vsize,
                executable=bool(chars & IMAGE_SCN_MEM_EXECUTE),
                writable=bool(chars & IMAGE_SCN_MEM_WRITE),
                readable=bool(chars & IMAGE_SCN_MEM_READ),
            )
        )
        spans.append((vaddr, max(vsize, rsize), roff, rsize))

    entry = _entry_offset(entry_rva, spans, size)
    return fmt, sections, entry


def _entry_offset(entry_rva: int, spans, size: int) -> int | None:
    """Map the entry RVA to a file offset via the section table.

    RVA 0 means no entry (common for DLL-style images). An RVA inside a
    section's virtual span but past its raw data has no file image and
    yields None; packers produce this on purpose.
    """
    if entry_rva == 0:
        return None
    for vaddr, vspan, roff, rsize in spans:
        if vspan > 0 and vaddr <= entry_rva < vaddr + vspan:
            delta = entry_rva - vaddr
            if delta < rsize:
                return roff + delta
            return None
    # below the first mapped section: header space maps 1:1
    first_va = min((v for v, s, _, _ in spans if s > 0), default=None)
    if first_va is not None and entry_rva < first_va and entry_rva < size:
        return entry_rva
    return None
