"""Feature extraction for executables.

Base features are hard-coded structural and entropy measurements.
Derived features are boolean/arithmetic expressions over earlier
features, declared in YAML; their declaration order fixes the vector
layout after the base block.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import yaml

from packlab import entropy as _entropy
from packlab.binfmt import Executable, entry_section
from packlab.config import FEATURES_FILE, conf_path, known_section_names
from packlab.errors import UnknownFeature

__all__ = [
    "BASE_FEATURES",
    "DerivedFeature",
    "load_feature_registry",
    "extract_features",
    "feature_descriptions",
]


class _Ctx:
    """Per-sample measurement cache: the entropy profile is shared by
    several features and computed at most once."""

    def __init__(self, exe: Executable):
        self.exe = exe

    @cached_property
    def profile(self) -> _entropy.EntropyProfile:
        return _entropy.profile(self.exe)

    @cached_property
    def entry_sec(self):
        return entry_section(self.exe)

    @cached_property
    def entry_entropy(self) -> float:
        sec = self.entry_sec
        if sec is None or sec.raw_size == 0:
            return 0.0
        blocks = _entropy.block_entropies(self.exe.data[sec.raw_offset:sec.raw_end])
        return float(sum(blocks) / len(blocks))


def _f_size(ctx: _Ctx) -> float:
    return float(ctx.exe.size)


def _f_section_count(ctx: _Ctx) -> float:
    return float(len(ctx.exe.sections))


def _f_avg_entropy(ctx: _Ctx) -> float:
    return ctx.profile.average


def _f_max_entropy(ctx: _Ctx) -> float:
    return ctx.profile.highest


def _f_entry_entropy(ctx: _Ctx) -> float:
    return ctx.entry_entropy


def _f_unknown_names(ctx: _Ctx) -> float:
    sections = ctx.exe.sections
    if not sections:
        return 0.0
    known = known_section_names()
    return sum(1 for s in sections if s.name not in known) / len(sections)


def _f_overlay_ratio(ctx: _Ctx) -> float:
    return ctx.exe.overlay_size / ctx.exe.size if ctx.exe.size else 0.0


def _f_zero_size_sections(ctx: _Ctx) -> float:
    return float(sum(1 for s in ctx.exe.sections if s.raw_size == 0))


def _f_wx_sections(ctx: _Ctx) -> float:
    return float(sum(1 for s in ctx.exe.sections if s.writable and s.executable))


def _f_entry_in_last(ctx: _Ctx) -> float:
    sec = ctx.entry_sec
    if sec is None or not ctx.exe.sections:
        return 0.0
    return 1.0 if sec == ctx.exe.sections[-1] else 0.0


BASE_FEATURES: dict[str, tuple[str, object]] = {
    "size": ("file size in bytes", _f_size),
    "section_count": ("number of sections", _f_section_count),
    "average_block_entropy": ("whole-file average block entropy", _f_avg_entropy),
    "highest_block_entropy": ("whole-file highest block entropy", _f_max_entropy),
    "entry_section_entropy": (
        "average block entropy of the entry-point section", _f_entry_entropy),
    "unknown_section_name_ratio": (
        "fraction of section names not on the known list", _f_unknown_names),
    "overlay_ratio": ("overlay size over file size", _f_overlay_ratio),
    "zero_size_section_count": (
        "sections with no raw bytes", _f_zero_size_sections),
    "wx_section_count": (
        "sections both writable and executable", _f_wx_sections),
    "entry_in_last_section": (
        "entry point inside the last section", _f_entry_in_last),
}


@dataclass(frozen=True)
class DerivedFeature:
    name: str
    description: str
    expr: str


def load_feature_registry(path=None) -> list[DerivedFeature]:
    registry = Path(path) if path else conf_path(FEATURES_FILE)
    if not registry.exists():
        return []
    with open(registry, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    out = []
    for name, entry in doc.items():
        if name in BASE_FEATURES:
            raise UnknownFeature(f"derived feature {name} shadows a base feature")
        out.append(DerivedFeature(
            name=name,
            description=str(entry.get("description", "")),
            expr=str(entry["expr"]),
        ))
    return out


_ALLOWED_NODES = (
    ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not,
    ast.USub, ast.UAdd, ast.BinOp, ast.Add, ast.Sub, ast.Mult, ast.Div,
    ast.Mod, ast.Pow, ast.Compare, ast.Lt, ast.LtE, ast.Gt, ast.GtE,
    ast.Eq, ast.NotEq, ast.Name, ast.Load, ast.Constant,
)


def _eval_expr(expr: str, values: dict[str, float]) -> float:
    """Evaluate a restricted arithmetic/boolean expression over features."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise UnknownFeature(f"cannot parse expression {expr!r}: {exc}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise UnknownFeature(
                f"disallowed construct {type(node).__name__} in {expr!r}"
            )
        if isinstance(node, ast.Name) and node.id not in values:
            raise UnknownFeature(f"unknown feature {node.id!r} in {expr!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, bool)):
            raise UnknownFeature(f"non-numeric constant in {expr!r}")
    result = eval(compile(tree, "<feature>", "eval"), {"__builtins__": {}}, dict(values))
    return float(result)


def extract_features(
    exe: Executable,
    derived: list[DerivedFeature] | None = None,
) -> dict[str, float]:
    """Ordered feature vector: base block first, then derived features.

    Booleans become 0/1. Every feature is present for every sample.
    """
    ctx = _Ctx(exe)
    values: dict[str, float] = {}
    for name, (_desc, fn) in BASE_FEATURES.items():
        values[name] = float(fn(ctx))
    for feat in (derived if derived is not None else load_feature_registry()):
        values[feat.name] = _eval_expr(feat.expr, values)
    return values


def feature_descriptions(derived: list[DerivedFeature] | None = None) -> dict[str, str]:
    out = {name: desc for name, (desc, _fn) in BASE_FEATURES.items()}
    for feat in (derived if derived is not None else load_feature_registry()):
        out[feat.name] = feat.description
    return out
