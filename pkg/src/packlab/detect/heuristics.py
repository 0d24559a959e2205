"""Structural risk indicators and their aggregation into a risk score.

Each indicator maps an executable to [0, 1]. Scores combine either as a
weighted mean or as a weighted power mean (the "power distance" form).
Weights are empirical and configurable; defaults are uniform.
"""

from __future__ import annotations

from typing import Callable

from packlab import entropy as _entropy
from packlab.binfmt import Executable, entry_section
from packlab.config import known_section_names
from packlab.errors import EmptyIndicatorSet

# entry-section average block entropy above this is suspicious
DEFAULT_EP_ENTROPY_THRESHOLD = 6.85

__all__ = [
    "INDICATORS",
    "unknown_section_names",
    "entry_section_entropy_high",
    "entry_point_anomalous",
    "ghost_sections",
    "evaluate_indicators",
    "heuristic_score",
]


def unknown_section_names(exe: Executable, **_: object) -> float:
    """Fraction of sections whose name is not on the known-names list."""
    if not exe.sections:
        return 0.0
    known = known_section_names()
    misses = sum(1 for s in exe.sections if s.name not in known)
    return misses / len(exe.sections)


def entry_section_entropy_high(
    exe: Executable,
    ep_entropy_threshold: float = DEFAULT_EP_ENTROPY_THRESHOLD,
    **_: object,
) -> float:
    """1 when the entry section's average block entropy exceeds the
    threshold."""
    sec = entry_section(exe)
    if sec is None or sec.raw_size == 0:
        return 0.0
    blocks = _entropy.block_entropies(exe.data[sec.raw_offset:sec.raw_end])
    return 1.0 if sum(blocks) / len(blocks) > ep_entropy_threshold else 0.0


def entry_point_anomalous(exe: Executable, **_: object) -> float:
    """1 when the entry point maps to no section, or to one that is both
    writable and executable."""
    sec = entry_section(exe)
    if sec is None:
        return 1.0
    return 1.0 if (sec.writable and sec.executable) else 0.0


def ghost_sections(exe: Executable, **_: object) -> float:
    """1 when any section occupies memory but no file bytes."""
    hit = any(s.raw_size == 0 and s.virtual_size > 0 for s in exe.sections)
    return 1.0 if hit else 0.0


INDICATORS: dict[str, Callable[..., float]] = {
    "unknown_section_names": unknown_section_names,
    "entry_section_entropy_high": entry_section_entropy_high,
    "entry_point_anomalous": entry_point_anomalous,
    "ghost_sections": ghost_sections,
}


def evaluate_indicators(exe: Executable, names=None, **params) -> dict[str, float]:
    names = list(INDICATORS) if names is None else list(names)
    return {name: INDICATORS[name](exe, **params) for name in names}


def heuristic_score(
    exe: Executable,
    indicators: list[tuple[str, float]] | None = None,
    aggregator: str = "weighted_mean",
    power: float = 2.0,
    **params,
) -> float:
    """Aggregate indicator values into a risk score in [0, 1].

    ``indicators`` is a list of (name, weight) pairs; weights must be
    positive and are normalized. ``weighted_mean`` computes the usual
    weighted average; ``power_distance`` the weighted power mean of
    order ``power``.
    """
    if indicators is None:
        indicators = [(name, 1.0) for name in INDICATORS]
    if not indicators:
        raise EmptyIndicatorSet("at least one indicator required")
    for name, weight in indicators:
        if weight <= 0:
            raise ValueError(f"indicator {name}: weight must be positive")
    values = evaluate_indicators(exe, [n for n, _ in indicators], **params)
    return aggregate_score(
        [(values[n], w) for n, w in indicators], aggregator=aggregator, power=power
    )


def aggregate_score(
    pairs: list[tuple[float, float]],
    aggregator: str = "weighted_mean",
    power: float = 2.0,
) -> float:
    """Combine (value, weight) pairs; factored out for direct testing."""
    if not pairs:
        raise EmptyIndicatorSet("at least one indicator required")
    total = sum(w for _, w in pairs)
    if aggregator == "weighted_mean":
        return sum(v * w for v, w in pairs) / total
    if aggregator == "power_distance":
        return (sum(w * v ** power for v, w in pairs) / total) ** (1.0 / power)
    raise ValueError(f"unknown aggregator {aggregator!r}")
