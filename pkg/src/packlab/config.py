"""Registry file resolution.

Defaults ship with the package under ``packlab/conf``; the PACKLAB_CONF
environment variable points at an alternative directory. Individual
loaders fall back to the shipped file when the override directory lacks
one.
"""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path

ENV_VAR = "PACKLAB_CONF"

DEFAULT_DIR = Path(__file__).resolve().parent / "conf"

DETECTORS_FILE = "detectors.yaml"
PACKERS_FILE = "packers.yaml"
FEATURES_FILE = "features.yaml"
ALGORITHMS_FILE = "algorithms.yaml"
SIGNATURES_FILE = "signatures.txt"
SECTION_NAMES_FILE = "section_names.txt"


def conf_dir() -> Path:
    override = os.environ.get(ENV_VAR)
    return Path(override) if override else DEFAULT_DIR


def conf_path(filename: str) -> Path:
    candidate = conf_dir() / filename
    if candidate.exists():
        return candidate
    return DEFAULT_DIR / filename


@lru_cache(maxsize=8)
def _load_names(path_str: str) -> frozenset[bytes]:
    names = set()
    for line in Path(path_str).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.add(line.encode("latin-1"))
    return frozenset(names)


def known_section_names() -> frozenset[bytes]:
    """Names commonly produced by compilers and linkers."""
    return _load_names(str(conf_path(SECTION_NAMES_FILE)))
