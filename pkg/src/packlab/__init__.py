"""packlab: a toolkit for studying executable packing.

Parse PE/ELF binaries, measure block entropy, run packing detectors,
generate labeled ground truths with built-in packer transformations,
train and evaluate classifiers, benchmark detectors, and plot section
entropy.
"""

from packlab.binfmt import ExecFormat, Executable, Section, entry_section, overlay_of, parse
from packlab.entropy import EntropyProfile, bintropy_decide, block_entropies, profile, shannon

__version__ = "0.1.0"

__all__ = [
    "ExecFormat",
    "Executable",
    "Section",
    "parse",
    "entry_section",
    "overlay_of",
    "EntropyProfile",
    "shannon",
    "block_entropies",
    "profile",
    "bintropy_decide",
    "__version__",
]
