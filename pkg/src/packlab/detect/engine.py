"""Detector framework: specs, execution, registry, voting.

Detector kinds:

* ``entropy``     — block-entropy thresholds over the whole file or the
                    entry-point section; decides both ways, strongly.
* ``signature``   — byte patterns; a match is a strong packed decision
                    (with the packer label), no match stays undecided.
* ``heuristic``   — structural indicators; raises suspicions and a risk
                    score. Undecided in strong mode; in weak mode two or
                    more distinct suspicions make a weak packed verdict.
* ``external-command`` — wraps a third-party tool via a command
                    template; stdout is parsed by configurable patterns.

A strong decision is packed exactly when formal evidence exists (a
signature match or an entropy-threshold exceedance); weak mode may
additionally promote suspicions.
"""

from __future__ import annotations

import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from packlab import entropy as _entropy
from packlab.binfmt import ExecFormat, Executable, entry_section
from packlab.config import conf_path, DETECTORS_FILE, SIGNATURES_FILE
from packlab.detect.heuristics import INDICATORS, aggregate_score, evaluate_indicators
from packlab.detect.signatures import Signature, load_signatures, match_signatures
from packlab.detect.verdict import Decision, Verdict, majority_verdict
from packlab.errors import (
    ExternalCommandFailed,
    FormatUnsupported,
    TooFewDetectors,
    WeakModeUnsupported,
)
from packlab.pack.packer import expand_formats

KINDS = ("entropy", "signature", "heuristic", "external-command")

# suspicion threshold for graded indicators
SUSPICION_TRIGGER = 0.5

__all__ = ["DetectorSpec", "Detector", "run", "superdetect", "load_detectors"]


@dataclass(frozen=True)
class DetectorSpec:
    """Registry entry describing one detector."""

    name: str
    formats: frozenset[ExecFormat]
    kind: str
    multiclass: bool = False
    weak_mode: bool = False
    superdetector: bool = True
    parameters: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"detector {self.name}: unknown kind {self.kind!r}")
        if self.kind == "external-command" and "command" not in self.parameters:
            raise ValueError(
                f"detector {self.name}: external-command needs a command template"
            )


class Detector:
    """Executable detector bound to its spec and loaded resources."""

    def __init__(self, spec: DetectorSpec, signatures: list[Signature] | None = None):
        self.spec = spec
        if spec.kind == "signature" and signatures is None:
            db = spec.parameters.get("db")
            path = Path(db) if db and Path(db).is_absolute() else conf_path(db or SIGNATURES_FILE)
            signatures = load_signatures(path)
        self.signatures = signatures or []

    # convenience passthroughs used by benchmarking and the CLI
    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def multiclass(self) -> bool:
        return self.spec.multiclass

    @property
    def weak_mode(self) -> bool:
        return self.spec.weak_mode

    @property
    def formats(self) -> frozenset[ExecFormat]:
        return self.spec.formats

    def run(self, exe: Executable, mode: str = "strong", classes: str = "binary") -> Verdict:
        return run(self, exe, mode=mode, classes=classes)


def run(
    detector: Detector | DetectorSpec,
    exe: Executable,
    mode: str = "strong",
    classes: str = "binary",
) -> Verdict:
    """Run one detector over one executable.

    Deterministic for identical inputs. In binary mode any packer label
    collapses to a plain packed verdict.
    """
    if isinstance(detector, DetectorSpec):
        detector = Detector(detector)
    spec = detector.spec
    if mode not in ("strong", "weak"):
        raise ValueError(f"bad mode {mode!r}")
    if classes not in ("binary", "multiclass"):
        raise ValueError(f"bad classes {classes!r}")
    if exe.format not in spec.formats:
        raise FormatUnsupported(f"{spec.name} does not handle {exe.format}")
    if mode == "weak" and not spec.weak_mode:
        raise WeakModeUnsupported(f"{spec.name} has no weak mode")

    handler = _HANDLERS[spec.kind]
    verdict = handler(detector, exe, mode)
    if classes == "binary":
        verdict = verdict.as_binary()
    return verdict


def _finalize(
    decision: Decision | None,
    label: str | None,
    traces: list[str],
    suspicions: list[str],
    mode: str,
) -> Verdict:
    """Apply the decision heuristic shared by all kinds.

    ``decision`` is the formal outcome (None when there is none). Weak
    mode promotes two or more distinct suspicions to a weak packed
    verdict when no formal decision exists.
    """
    if decision is not None:
        return Verdict(decision, label=label, strength="strong",
                       traces=tuple(traces), suspicions=tuple(suspicions))
    if mode == "weak" and len(set(suspicions)) >= 2:
        traces = traces + ["promoted by suspicions"]
        return Verdict(Decision.PACKED, strength="weak",
                       traces=tuple(traces), suspicions=tuple(suspicions))
    return Verdict(Decision.UNDECIDED, strength="strong",
                   traces=tuple(traces), suspicions=tuple(suspicions))


def _run_entropy(detector: Detector, exe: Executable, mode: str) -> Verdict:
    params = detector.spec.parameters
    block_size = int(params.get("block_size", _entropy.DEFAULT_BLOCK_SIZE))
    avg_thr = float(params.get("avg_threshold", _entropy.DEFAULT_AVG_THRESHOLD))
    max_thr = float(params.get("max_threshold", _entropy.DEFAULT_MAX_THRESHOLD))
    scope = params.get("scope", "file")

    if scope == "entry_section":
        sec = entry_section(exe)
        if sec is None or sec.raw_size == 0:
            return _finalize(None, None, ["no entry section to score"], [], mode)
        blocks = _entropy.block_entropies(
            exe.data[sec.raw_offset:sec.raw_end], block_size
        )
        average, highest = sum(blocks) / len(blocks), max(blocks)
        scope_trace = f"entry section {sec.display_name}"
    else:
        prof = _entropy.profile(exe, block_size)
        average, highest = prof.average, prof.highest
        scope_trace = "whole file"

    packed = average > avg_thr and highest > max_thr
    traces = [
        f"{scope_trace}: average {average:.3f} vs {avg_thr}, "
        f"highest {highest:.3f} vs {max_thr}"
    ]
    return _finalize(
        Decision.PACKED if packed else Decision.NOT_PACKED, None, traces, [], mode
    )


def _run_signature(detector: Detector, exe: Executable, mode: str) -> Verdict:
    traces = []
    if exe.entry_point is None and any(s.ep_only for s in detector.signatures):
        traces.append("no entry point: entry-anchored signatures skipped")
    labels = match_signatures(detector.signatures, exe)
    if labels:
        traces.append("matched: " + ", ".join(labels))
        return _finalize(Decision.PACKED, labels[0], traces, [], mode)
    traces.append("no signature matched")
    return _finalize(None, None, traces, [], mode)


def _run_heuristic(detector: Detector, exe: Executable, mode: str) -> Verdict:
    params = dict(detector.spec.parameters)
    weights = params.pop("weights", None)
    aggregator = params.pop("aggregator", "weighted_mean")
    power = float(params.pop("power", 2.0))
    pairs = (
        list(weights.items()) if weights else [(n, 1.0) for n in INDICATORS]
    )
    values = evaluate_indicators(exe, [n for n, _ in pairs], **params)
    risk = aggregate_score([(values[n], w) for n, w in pairs],
                           aggregator=aggregator, power=power)
    suspicions = [n for n, v in values.items() if v >= SUSPICION_TRIGGER]
    traces = [f"risk score {risk:.3f} ({aggregator})"] + [
        f"indicator {n} = {v:.3f}" for n, v in values.items()
    ]
    return _finalize(None, None, traces, suspicions, mode)


def _run_external(detector: Detector, exe: Executable, mode: str) -> Verdict:
    params = detector.spec.parameters
    template = params["command"]
    ok_codes = set(params.get("ok_exit_codes", [0]))
    with tempfile.TemporaryDirectory(prefix=f"packlab-{detector.name}-") as tmp:
        sample = Path(tmp) / "sample.bin"
        sample.write_bytes(exe.data)
        cmd = template.format(path=str(sample))
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
    if proc.returncode not in ok_codes:
        raise ExternalCommandFailed(
            f"{detector.name} exited {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    stdout = proc.stdout
    traces = [f"command exited {proc.returncode}"]
    label = None
    label_pattern = params.get("label_pattern")
    if label_pattern:
        m = re.search(label_pattern, stdout, re.MULTILINE)
        if m:
            label = m.group(1) if m.groups() else m.group(0)
    packed_pattern = params.get("packed_pattern")
    clean_pattern = params.get("not_packed_pattern")
    suspicion_pattern = params.get("suspicion_pattern")
    suspicions = (
        re.findall(suspicion_pattern, stdout, re.MULTILINE) if suspicion_pattern else []
    )
    if packed_pattern and re.search(packed_pattern, stdout, re.MULTILINE):
        return _finalize(Decision.PACKED, label, traces, suspicions, mode)
    if clean_pattern and re.search(clean_pattern, stdout, re.MULTILINE):
        return _finalize(Decision.NOT_PACKED, None, traces, suspicions, mode)
    return _finalize(None, None, traces, suspicions, mode)


_HANDLERS = {
    "entropy": _run_entropy,
    "signature": _run_signature,
    "heuristic": _run_heuristic,
    "external-command": _run_external,
}


class SuperDetector:
    """Several detectors voting as one.

    Formats are the intersection of the members'. Weak mode is passed
    only to members that support it; the others keep voting strongly.
    """

    def __init__(self, detectors: list[Detector]):
        eligible = [d for d in detectors if d.spec.superdetector]
        if len(eligible) < 2:
            raise TooFewDetectors(
                f"superdetector needs >= 2 eligible detectors, got {len(eligible)}"
            )
        self.members = eligible
        self.name = "+".join(d.name for d in eligible)
        self.multiclass = any(d.multiclass for d in eligible)
        self.weak_mode = any(d.weak_mode for d in eligible)
        self.formats = frozenset.intersection(*(d.formats for d in eligible))

    def run(self, exe: Executable, mode: str = "strong", classes: str = "binary") -> Verdict:
        votes = []
        for member in self.members:
            member_mode = mode if (mode == "strong" or member.weak_mode) else "strong"
            votes.append(run(member, exe, mode=member_mode, classes=classes))
        return majority_verdict(votes, classes=classes)


def superdetect(
    detectors: list[Detector],
    exe: Executable,
    mode: str = "strong",
    classes: str = "binary",
) -> Verdict:
    """Strict-majority vote across eligible detectors."""
    return SuperDetector(detectors).run(exe, mode=mode, classes=classes)


def load_detectors(path=None) -> dict[str, Detector]:
    """Load the detector registry (YAML) into ready-to-run detectors."""
    registry = Path(path) if path else conf_path(DETECTORS_FILE)
    with open(registry, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    detectors: dict[str, Detector] = {}
    for name, entry in doc.items():
        spec = DetectorSpec(
            name=name,
            formats=expand_formats(entry.get("formats", ["All"])),
            kind=entry["kind"],
            multiclass=bool(entry.get("multiclass", False)),
            weak_mode=bool(entry.get("weak_mode", False)),
            superdetector=bool(entry.get("superdetector", True)),
            parameters=dict(entry.get("parameters") or {}),
            notes=str(entry.get("notes", "")),
        )
        detectors[name] = Detector(spec)
    return detectors
