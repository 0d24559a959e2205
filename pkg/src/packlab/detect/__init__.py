from packlab.detect.engine import (
    Detector,
    DetectorSpec,
    SuperDetector,
    load_detectors,
    run,
    superdetect,
)
from packlab.detect.heuristics import (
    INDICATORS,
    aggregate_score,
    evaluate_indicators,
    heuristic_score,
)
from packlab.detect.signatures import (
    Signature,
    load_signatures,
    match_signatures,
    parse_signature_line,
)
from packlab.detect.verdict import Decision, Verdict, majority_verdict

__all__ = [
    "Detector",
    "DetectorSpec",
    "SuperDetector",
    "load_detectors",
    "run",
    "superdetect",
    "INDICATORS",
    "aggregate_score",
    "evaluate_indicators",
    "heuristic_score",
    "Signature",
    "load_signatures",
    "match_signatures",
    "parse_signature_line",
    "Decision",
    "Verdict",
    "majority_verdict",
]
