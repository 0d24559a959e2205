"""Verdict model and vote combination.

A verdict separates the decision (packed / not packed / undecided) from
its strength: strong verdicts rest on formal evidence, weak ones may
rest on accumulated suspicions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from packlab.errors import TooFewDetectors

__all__ = ["Decision", "Verdict", "majority_verdict"]


class Decision(str, Enum):
    PACKED = "packed"
    NOT_PACKED = "not_packed"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    label: str | None = None  # packer name, only for packed verdicts
    strength: str = "strong"  # "strong" | "weak"
    traces: tuple[str, ...] = field(default_factory=tuple)
    suspicions: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.decision is not Decision.PACKED and self.label is not None:
            raise ValueError("only packed verdicts carry a label")

    @property
    def is_packed(self) -> bool:
        return self.decision is Decision.PACKED

    def as_binary(self) -> "Verdict":
        """Collapse any packer label to a plain packed verdict."""
        if self.label is None:
            return self
        return Verdict(
            decision=self.decision,
            label=None,
            strength=self.strength,
            traces=self.traces,
            suspicions=self.suspicions,
        )


def majority_verdict(votes: list[Verdict], classes: str = "binary") -> Verdict:
    """Combine detector votes by strict majority on the packed bit.

    Undecided votes count for neither side; a tie or the lack of a
    strict majority yields undecided. In multiclass mode the label is
    the most frequent one among packed voters, ties broken
    lexicographically.
    """
    if len(votes) < 2:
        raise TooFewDetectors("voting needs at least two verdicts")
    packed = [v for v in votes if v.decision is Decision.PACKED]
    clean = [v for v in votes if v.decision is Decision.NOT_PACKED]
    traces = tuple(
        f"vote[{i}]: {v.decision.value}" + (f" ({v.label})" if v.label else "")
        for i, v in enumerate(votes)
    )
    suspicions = tuple(s for v in votes for s in v.suspicions)
    strength = "weak" if any(v.strength == "weak" for v in votes) else "strong"

    if len(packed) > len(votes) / 2:
        label = None
        if classes == "multiclass":
            tally: dict[str, int] = {}
            for v in packed:
                if v.label:
                    tally[v.label] = tally.get(v.label, 0) + 1
            if tally:
                label = min(tally, key=lambda k: (-tally[k], k))
        return Verdict(Decision.PACKED, label=label, strength=strength,
                       traces=traces, suspicions=suspicions)
    if len(clean) > len(votes) / 2:
        return Verdict(Decision.NOT_PACKED, strength=strength,
                       traces=traces, suspicions=suspicions)
    return Verdict(Decision.UNDECIDED, strength=strength,
                   traces=traces, suspicions=suspicions)
