import pytest

from packlab.binfmt import ExecFormat, parse
from packlab.config import PACKERS_FILE, conf_path
from packlab.corpus import generate_clean
from packlab.pack import LayoutPlan, SectionPlan, build, load_packers


@pytest.fixture(autouse=True)
def reproducible_env(monkeypatch):
    # pin manifest timestamps so dataset bytes are reproducible
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


@pytest.fixture(scope="session")
def packers():
    return load_packers(conf_path(PACKERS_FILE))


def build_pe_fixture(
    fmt=ExecFormat.PE32,
    sections=None,
    entry=(0, 16),
    overlay=b"",
):
    """Minimal PE with a .text/.data/.rsrc layout unless overridden."""
    if sections is None:
        sections = [
            SectionPlan(name=b".text", data=b"\xc3" * 1024, executable=True),
            SectionPlan(name=b".data", data=b"d" * 512, writable=True),
            SectionPlan(name=b".rsrc", data=b"r" * 256),
        ]
    return build(LayoutPlan(format=fmt, sections=sections, entry=entry,
                            overlay=overlay))


def build_elf_fixture(
    fmt=ExecFormat.ELF64,
    sections=None,
    entry=(0, 0),
    overlay=b"",
):
    if sections is None:
        sections = [
            SectionPlan(name=b".text", data=b"\x90" * 1024, executable=True),
            SectionPlan(name=b".data", data=b"d" * 512, writable=True),
            SectionPlan(name=b".rodata", data=b"r" * 256),
        ]
    return build(LayoutPlan(format=fmt, sections=sections, entry=entry,
                            overlay=overlay))


@pytest.fixture
def clean_pe():
    return parse(generate_clean(ExecFormat.PE32, seed=1234))


@pytest.fixture
def clean_elf():
    return parse(generate_clean(ExecFormat.ELF64, seed=1234))
