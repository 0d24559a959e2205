from packlab.pack.layout import LayoutPlan, SectionPlan, build, build_elf, build_pe, layout_of
from packlab.pack.packer import (
    PackerCategory,
    PackerSpec,
    PackResult,
    apply,
    expand_formats,
    load_packers,
)
from packlab.pack.transforms import (
    BUILTIN_TRANSFORMS,
    append_stub,
    compress_sections,
    strip_overlay,
    stub_marker,
    xor_encode_sections,
)

__all__ = [
    "LayoutPlan",
    "SectionPlan",
    "build",
    "build_pe",
    "build_elf",
    "layout_of",
    "PackerCategory",
    "PackerSpec",
    "PackResult",
    "apply",
    "expand_formats",
    "load_packers",
    "BUILTIN_TRANSFORMS",
    "append_stub",
    "compress_sections",
    "strip_overlay",
    "stub_marker",
    "xor_encode_sections",
]
