"""Declarative packer specs and their application to executables.

A packer is a named, ordered list of steps: built-in transforms or
external command templates. Variants override declared step parameters,
e.g. a different compression level or key. Applying a spec to the same
(executable, seed) always yields the same bytes.
"""

from __future__ import annotations

import random
import subprocess
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml

from packlab.binfmt import ExecFormat, Executable, parse
from packlab.errors import FormatUnsupported, PackingFailed
from packlab.pack.layout import build, layout_of
from packlab.pack.transforms import BUILTIN_TRANSFORMS, append_stub, stub_marker

__all__ = [
    "PackerCategory",
    "PackerSpec",
    "PackResult",
    "apply",
    "load_packers",
    "expand_formats",
]


class PackerCategory(str, Enum):
    BUNDLER = "bundler"
    COMPRESSOR = "compressor"
    ENCODER = "encoder"
    ENCRYPTOR = "encryptor"
    MUTATOR = "mutator"
    PROTECTOR = "protector"
    VIRTUALIZER = "virtualizer"


def expand_formats(names) -> frozenset[ExecFormat]:
    """Expand format names, accepting families (PE, ELF) and All."""
    out: set[ExecFormat] = set()
    for name in names:
        token = str(name).upper()
        if token == "ALL":
            out.update(ExecFormat)
        elif token in ("PE", "ELF"):
            out.update(f for f in ExecFormat if f.family == token)
        else:
            out.add(ExecFormat(token))
    return frozenset(out)


@dataclass
class PackerSpec:
    name: str
    categories: frozenset[PackerCategory]
    formats: frozenset[ExecFormat]
    steps: list[dict]  # [{step_name: {params}}] or [{command: template}]
    variants: dict[str, dict] = field(default_factory=dict)
    seedable: bool = True

    def __post_init__(self):
        if not self.categories:
            raise ValueError(f"packer {self.name}: at least one category required")
        if not self.steps:
            raise ValueError(f"packer {self.name}: at least one step required")
        step_names = [_step_name(s) for s in self.steps]
        for vname, overrides in self.variants.items():
            for sname, params in overrides.items():
                if sname not in step_names:
                    raise ValueError(
                        f"packer {self.name}: variant {vname} overrides "
                        f"unknown step {sname}"
                    )
                base_params = next(
                    _step_args(s) for s in self.steps if _step_name(s) == sname
                )
                unknown = set(params) - set(base_params)
                if unknown:
                    raise ValueError(
                        f"packer {self.name}: variant {vname} overrides "
                        f"undeclared parameters {sorted(unknown)} of {sname}"
                    )

    def candidates(self) -> list[tuple["PackerSpec", str | None]]:
        """(spec, variant) pairs: base configuration first, then variants."""
        return [(self, None)] + [(self, v) for v in self.variants]


def _step_name(step: dict) -> str:
    return next(iter(step))


def _step_args(step: dict) -> dict:
    args = step[_step_name(step)]
    return dict(args) if isinstance(args, dict) else {}


@dataclass(frozen=True)
class PackResult:
    data: bytes
    label: str
    journal: tuple[dict, ...] = ()


def apply(
    spec: PackerSpec,
    exe: Executable,
    seed: int = 0,
    variant: str | None = None,
) -> PackResult:
    """Run the spec's steps over the executable and rebuild the file.

    The output re-parses under the same format. The label is the spec
    name, suffixed with the variant name when one is used.
    """
    if exe.format not in spec.formats:
        raise FormatUnsupported(
            f"packer {spec.name} does not support {exe.format}"
        )
    if variant is not None and variant not in spec.variants:
        raise PackingFailed(f"packer {spec.name} has no variant {variant}")

    overrides = spec.variants.get(variant, {}) if variant else {}
    rng = random.Random(seed)
    plan = layout_of(exe)

    for step in spec.steps:
        name = _step_name(step)
        args = _step_args(step)
        if name == "command":
            data = _run_external(step["command"], build(plan), rng)
            plan = layout_of(parse(data))
            continue
        fn = BUILTIN_TRANSFORMS.get(name)
        if fn is None:
            raise PackingFailed(f"packer {spec.name}: unknown step {name}")
        args.update(overrides.get(name, {}))
        if fn is append_stub and "marker" not in args:
            args["marker"] = stub_marker(spec.name)
        try:
            fn(plan, rng, **args)
        except PackingFailed:
            raise
        except Exception as exc:
            raise PackingFailed(f"step {name} failed: {exc}") from exc

    data = build(plan)
    try:
        parse(data)
    except Exception as exc:  # closure check: never ship unparseable output
        raise PackingFailed(f"packed output does not re-parse: {exc}") from exc
    label = spec.name if variant is None else f"{spec.name}-{variant}"
    return PackResult(data=data, label=label, journal=tuple(plan.journal))


def _run_external(template: str, data: bytes, rng: random.Random) -> bytes:
    """Run an external packer command over a temp copy of the sample.

    The template gets {input} and {output} substituted; a command that
    rewrites in place can use {input} alone.
    """
    with tempfile.TemporaryDirectory(prefix="packlab-") as tmp:
        src = Path(tmp) / "sample.bin"
        dst = Path(tmp) / "packed.bin"
        src.write_bytes(data)
        cmd = template.format(input=str(src), output=str(dst))
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise PackingFailed(
                f"external packer exited {proc.returncode}: {proc.stderr.strip()[:200]}"
            )
        target = dst if dst.exists() else src
        return target.read_bytes()


def load_packers(path) -> dict[str, PackerSpec]:
    """Load the packer registry from YAML.

    The optional ``install`` key is accepted and ignored: item
    installation is outside this toolkit's scope.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    specs: dict[str, PackerSpec] = {}
    for name, entry in doc.items():
        specs[name] = PackerSpec(
            name=name,
            categories=frozenset(
                PackerCategory(c) for c in entry.get("categories", [])
            ),
            formats=expand_formats(entry.get("formats", ["All"])),
            steps=list(entry.get("steps", [])),
            variants={k: dict(v or {}) for k, v in (entry.get("variants") or {}).items()},
            seedable=bool(entry.get("seedable", True)),
        )
    return specs
