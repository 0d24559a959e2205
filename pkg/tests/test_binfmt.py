"""Parser tests, checked against an independent header-walking script."""

import struct

import pytest

from packlab.binfmt import ExecFormat, entry_section, overlay_of, parse
from packlab.corpus import generate_clean
from packlab.errors import FileTooLarge, MalformedHeader, Truncated, UnknownFormat
from packlab.pack import LayoutPlan, SectionPlan, build

from conftest import build_elf_fixture, build_pe_fixture


def walk_pe_headers(data: bytes):
    """Independent minimal PE walk (no packlab imports beyond struct).

    Returns (n_sections, [(name, raw_offset, raw_size, vaddr)], entry_rva).
    """
    (e_lfanew,) = struct.unpack_from("<I", data, 0x3C)
    assert data[e_lfanew:e_lfanew + 4] == b"PE\x00\x00"
    coff = e_lfanew + 4
    n_sections, = struct.unpack_from("<H", data, coff + 2)
    opt_size, = struct.unpack_from("<H", data, coff + 16)
    opt = coff + 20
    entry_rva, = struct.unpack_from("<I", data, opt + 16)
    table = opt + opt_size
    sections = []
    for i in range(n_sections):
        off = table + i * 40
        name = data[off:off + 8].rstrip(b"\x00")
        vsize, vaddr, rsize, roff = struct.unpack_from("<IIII", data, off + 8)
        sections.append((name, roff, rsize, vaddr))
    return n_sections, sections, entry_rva


class TestParseDispatch:
    def test_elf32_magic_and_class(self):
        data = build_elf_fixture(fmt=ExecFormat.ELF32)
        assert data[:4] == b"\x7fELF" and data[4] == 1
        assert parse(data).format is ExecFormat.ELF32

    def test_elf64_class(self):
        assert parse(build_elf_fixture()).format is ExecFormat.ELF64

    def test_pe32_and_pe64(self):
        assert parse(build_pe_fixture()).format is ExecFormat.PE32
        assert parse(build_pe_fixture(fmt=ExecFormat.PE64)).format is ExecFormat.PE64

    def test_unknown_magic(self):
        with pytest.raises(UnknownFormat):
            parse(b"ABCD")

    def test_empty_input(self):
        with pytest.raises(UnknownFormat):
            parse(b"")

    def test_mz_without_pe_signature(self):
        # plain MSDOS image: not one of the modeled formats
        data = bytearray(build_pe_fixture())
        (e_lfanew,) = struct.unpack_from("<I", data, 0x3C)
        data[e_lfanew:e_lfanew + 4] = b"XX\x00\x00"
        with pytest.raises(UnknownFormat):
            parse(bytes(data))

    def test_file_too_large(self):
        with pytest.raises(FileTooLarge):
            parse(b"\x7fELF" + b"\x00" * (65 * 1024 * 1024))


class TestMinimalPeFixture:
    """Hand-crafted PE32 checked against the independent walker."""

    def test_three_sections_in_raw_offset_order(self):
        data = build_pe_fixture()
        exe = parse(data)
        n, raw_sections, entry_rva = walk_pe_headers(data)
        assert n == 3
        assert [s.name for s in exe.sections] == [b".text", b".data", b".rsrc"]
        # order and offsets must agree with the independent walk
        walked = sorted(raw_sections, key=lambda s: s[1])
        assert [(s.name, s.raw_offset, s.raw_size) for s in exe.sections] == [
            (name, roff, rsize) for name, roff, rsize, _ in walked
        ]

    def test_entry_offset_inside_text(self):
        data = build_pe_fixture(entry=(0, 16))
        exe = parse(data)
        _, raw_sections, entry_rva = walk_pe_headers(data)
        name, roff, rsize, vaddr = raw_sections[0]
        assert name == b".text"
        # independent mapping of the entry RVA to a file offset
        assert exe.entry_point == roff + (entry_rva - vaddr)
        assert entry_section(exe).name == b".text"

    def test_sections_within_file(self):
        exe = parse(build_pe_fixture(overlay=b"x" * 37))
        for sec in exe.sections:
            assert 0 <= sec.raw_offset <= sec.raw_end <= exe.size


class TestOverlay:
    def test_zero_when_last_section_ends_at_eof(self):
        exe = parse(build_pe_fixture())
        assert overlay_of(exe) == (exe.size, 0)

    def test_sixteen_of_seventeen_megabytes(self):
        # installer-style file: 1 MB of sections, 16 MB of overlay
        sections = [
            SectionPlan(name=b".text", data=b"\xc3" * (1024 * 1024), executable=True),
        ]
        data = build(LayoutPlan(
            format=ExecFormat.PE32, sections=sections, entry=(0, 0),
            overlay=b"\x00" * (16 * 1024 * 1024),
        ))
        exe = parse(data)
        assert overlay_of(exe)[1] == 16 * 1024 * 1024
        assert exe.overlay[0] + exe.overlay[1] == exe.size

    def test_appending_bytes_grows_overlay_exactly(self):
        base = build_pe_fixture()
        assert parse(base).overlay[1] == 0
        grown = parse(base + b"Z" * 100)
        assert grown.overlay == (len(base), 100)


class TestEntrySection:
    def test_entry_beyond_all_sections_is_absent(self):
        # entry delta beyond the raw data of its section: no file image
        data = build_pe_fixture(
            sections=[
                SectionPlan(name=b".text", data=b"\xc3" * 64,
                            virtual_size=4096, executable=True),
            ],
            entry=(0, 2000),
        )
        exe = parse(data)
        assert exe.entry_point is None
        assert entry_section(exe) is None

    def test_elf_entry_in_second_executable_section(self):
        data = build_elf_fixture(
            sections=[
                SectionPlan(name=b".init", data=b"\x90" * 256, executable=True),
                SectionPlan(name=b".text", data=b"\x90" * 1024, executable=True),
            ],
            entry=(1, 42),
        )
        exe = parse(data)
        assert entry_section(exe).name == b".text"
        sec = entry_section(exe)
        assert exe.entry_point == sec.raw_offset + 42

    def test_no_entry_when_rva_zero(self):
        data = build_pe_fixture(entry=None)
        assert parse(data).entry_point is None


class TestErrors:
    def test_truncated_section_table(self):
        data = build_pe_fixture()
        with pytest.raises(Truncated):
            parse(data[:300])

    def test_truncated_section_data(self):
        data = bytearray(build_pe_fixture())
        # chop the file inside the last section's raw range
        with pytest.raises(Truncated):
            parse(bytes(data[:-100]))

    def test_malformed_optional_magic(self):
        data = bytearray(build_pe_fixture())
        (e_lfanew,) = struct.unpack_from("<I", data, 0x3C)
        struct.pack_into("<H", data, e_lfanew + 4 + 20, 0x999)
        with pytest.raises(MalformedHeader):
            parse(bytes(data))

    def test_truncated_elf_section_headers(self):
        data = build_elf_fixture()
        with pytest.raises(Truncated):
            parse(data[:80])


class TestInvariantsAndDeterminism:
    def test_parse_is_deterministic(self):
        data = generate_clean(ExecFormat.PE64, seed=77)
        assert parse(data) == parse(data)

    def test_overlay_invariant_across_corpus(self):
        for fmt in ExecFormat:
            for seed in range(3):
                exe = parse(generate_clean(fmt, seed=seed))
                start, length = exe.overlay
                assert start + length == exe.size
                for sec in exe.sections:
                    assert sec.raw_end <= exe.size

    def test_parses_a_real_system_binary(self):
        import pathlib
        candidate = pathlib.Path("/bin/ls")
        if not candidate.exists():
            pytest.skip("no /bin/ls")
        exe = parse(candidate.read_bytes())
        assert exe.format in (ExecFormat.ELF64, ExecFormat.ELF32)
        assert any(s.name == b".text" for s in exe.sections)
        assert entry_section(exe) is not None
