"""Detector performance harness.

Accuracy is evaluated over four classes (binary/multiclass crossed with
strong/weak detection); undecided verdicts count against the detector
in the pessimistic reading and as a not-packed call in the optimistic
one, which yields the reported lower and upper bounds. Timing uses a
monotonic clock, median of k repetitions, on pre-parsed samples so file
I/O stays out of the measurement. Time complexity is picked by least
squares among constant, logarithmic, linear, linear-logarithmic and
quadratic models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from packlab.dataset.store import Dataset
from packlab.errors import DegenerateSpan, EmptyDataset, TooFewPoints

MAX_FIT_SIZE = 10 * 1024 * 1024  # fitting window upper bound, bytes

# a more complex class must improve the normalized residual by more
# than this relative margin, otherwise the simpler class is kept
REL_TOLERANCE = 0.25

__all__ = [
    "TimingPoint",
    "AccuracyCell",
    "AccuracyReport",
    "ComplexityClass",
    "evaluate_accuracy",
    "measure_time",
    "fit_complexity",
    "bench_report",
    "BenchReport",
]


@dataclass(frozen=True)
class TimingPoint:
    size: int      # bytes
    seconds: float


@dataclass(frozen=True)
class AccuracyCell:
    classes: str
    mode: str
    n: int
    undecided: int
    pessimistic: float  # undecided counted wrong
    optimistic: float   # undecided counted as a not-packed call


@dataclass
class AccuracyReport:
    detector: str
    cells: dict[tuple[str, str], AccuracyCell | None]
    false_positive_rate: float | None

    @property
    def lower_bound(self) -> float:
        return min(c.pessimistic for c in self.cells.values() if c is not None)

    @property
    def upper_bound(self) -> float:
        return max(c.optimistic for c in self.cells.values() if c is not None)


def evaluate_accuracy(
    detector,
    ds: Dataset,
    classes: tuple[str, ...] = ("binary", "multiclass"),
    modes: tuple[str, ...] = ("strong", "weak"),
) -> AccuracyReport:
    """Accuracy across the requested class combinations the detector
    supports (all four by default).

    Binary accuracy scores the packed bit; multiclass additionally
    requires the exact packer label. The false-positive rate counts
    packed verdicts on clean samples in the binary task.
    """
    samples = [
        (rec, exe) for rec, exe in ds.iter_executables()
        if exe.format in detector.formats
    ]
    if not samples:
        raise EmptyDataset(f"no samples usable by {detector.name}")

    cells: dict[tuple[str, str], AccuracyCell | None] = {}
    fpr = None
    for cls in classes:
        for mode in modes:
            key = (cls, mode)
            if cls == "multiclass" and not detector.multiclass:
                cells[key] = None
                continue
            if mode == "weak" and not detector.weak_mode:
                cells[key] = None
                continue
            correct = optimistic = undecided = 0
            false_pos = clean_total = 0
            for rec, exe in samples:
                verdict = detector.run(exe, mode=mode, classes=cls)
                truth_packed = rec.packed
                if not truth_packed:
                    clean_total += 1
                    if verdict.is_packed:
                        false_pos += 1
                if verdict.decision.value == "undecided":
                    undecided += 1
                    if not truth_packed:
                        optimistic += 1
                    continue
                hit = verdict.is_packed == truth_packed
                if hit and cls == "multiclass" and truth_packed:
                    hit = verdict.label == rec.label
                correct += int(hit)
                optimistic += int(hit)
            n = len(samples)
            cells[key] = AccuracyCell(
                classes=cls, mode=mode, n=n, undecided=undecided,
                pessimistic=correct / n, optimistic=optimistic / n,
            )
            if key[0] == "binary" and fpr is None and clean_total:
                fpr = false_pos / clean_total
    if all(cell is None for cell in cells.values()):
        raise EmptyDataset(
            f"{detector.name} supports none of the requested class combinations"
        )
    return AccuracyReport(detector=detector.name, cells=cells,
                          false_positive_rate=fpr)


def measure_time(detector, ds: Dataset, repetitions: int = 3) -> list[TimingPoint]:
    """Median-of-k wall time per sample, detector run only.

    Samples are read and parsed before the clock starts. Points beyond
    the fitting window stay in the output; fitting filters them.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    points = []
    for rec, exe in ds.iter_executables():
        if exe.format not in detector.formats:
            continue
        runs = []
        for _ in range(repetitions):
            start = time.perf_counter()
            detector.run(exe)
            runs.append(time.perf_counter() - start)
        points.append(TimingPoint(size=rec.size, seconds=float(np.median(runs))))
    return points


@dataclass(frozen=True)
class ComplexityClass:
    label: str           # e.g. "O(n log n)"
    scale: float         # a in t = a*f(n) + b
    intercept: float
    residual: float      # SS_res / SS_tot

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.label


_MODELS: list[tuple[str, object]] = [
    ("O(1)", None),
    ("O(log n)", lambda n: np.log(n)),
    ("O(n)", lambda n: n),
    ("O(n log n)", lambda n: n * np.log(n)),
    ("O(n^2)", lambda n: n * n),
]


def fit_complexity(
    points: list[TimingPoint],
    rel_tolerance: float = REL_TOLERANCE,
) -> ComplexityClass:
    """Best-fitting complexity class for timing data.

    Every model gets an intercept (startup cost). Timing noise is
    multiplicative, so models are fitted by relative least squares
    (residuals scaled by the observed time); that makes the choice
    invariant under uniform scaling and keeps log-spaced small sizes
    from being drowned out. Residuals are reported relative to the
    constant model's, and among models within ``rel_tolerance`` of the
    minimum the simplest wins, so pure noise cannot dress up as growth.
    """
    pts = [p for p in points if 0 < p.size <= MAX_FIT_SIZE]
    if len(pts) < 5:
        raise TooFewPoints(f"{len(pts)} usable points, need at least 5")
    sizes = np.array([p.size for p in pts], dtype=np.float64)
    times = np.array([p.seconds for p in pts], dtype=np.float64)
    if sizes.max() / sizes.min() < 4.0:
        raise DegenerateSpan("timing points span fewer than two size octaves")

    weights = 1.0 / np.maximum(times, 1e-12)
    # constant minimizing sum(((t - c)/t)^2)
    const = float(weights.sum() / (weights * weights).sum())
    ss_const = float((((times - const) * weights) ** 2).sum())
    if ss_const <= 1e-18 * len(times):
        return ComplexityClass("O(1)", scale=const, intercept=0.0, residual=0.0)

    fits: list[ComplexityClass] = [
        ComplexityClass("O(1)", scale=const, intercept=0.0, residual=1.0)
    ]
    target = np.ones_like(times)
    for label, fn in _MODELS[1:]:
        basis = fn(sizes)
        design = np.column_stack([basis * weights, weights])
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        ss_rel = float(((target - design @ coef) ** 2).sum())
        fits.append(ComplexityClass(label, scale=float(coef[0]),
                                    intercept=float(coef[1]),
                                    residual=ss_rel / ss_const))

    best = min(f.residual for f in fits)
    for fit in fits:  # listed simple-to-complex
        if fit.residual <= best * (1.0 + rel_tolerance) + 1e-15:
            return fit
    return fits[-1]  # unreachable


# -- report ---------------------------------------------------------------------


@dataclass
class BenchRow:
    detector: str
    accuracy: AccuracyReport
    times: list[TimingPoint]
    complexity: ComplexityClass | None
    observations: str = ""

    def cells(self) -> tuple[str, ...]:
        acc = f"{self.accuracy.lower_bound * 100:.2f}%-{self.accuracy.upper_bound * 100:.2f}%"
        in_range = [p.seconds for p in self.times if 0 < p.size <= MAX_FIT_SIZE]
        rng = (
            f"{min(in_range):.3f}-{max(in_range):.3f}s" if in_range else "n/a"
        )
        comp = self.complexity.label if self.complexity else "n/a"
        fpr = self.accuracy.false_positive_rate
        obs = self.observations or ""
        if fpr is not None:
            obs = (obs + " " if obs else "") + f"FPR {fpr * 100:.2f}%."
        return (self.detector, acc, rng, comp, obs)


@dataclass
class BenchReport:
    rows: list[BenchRow]

    HEADER = ("Detector", "Accuracy", "Time", "Complexity", "Observations")

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(self.HEADER) + " |",
                 "|" + "---|" * len(self.HEADER)]
        for row in self.rows:
            lines.append("| " + " | ".join(row.cells()) + " |")
        return "\n".join(lines)

    def to_csv(self) -> str:
        out = [",".join(self.HEADER)]
        for row in self.rows:
            out.append(",".join('"' + c.replace('"', '""') + '"' for c in row.cells()))
        return "\n".join(out) + "\n"


def bench_report(detectors, ds: Dataset, repetitions: int = 3) -> BenchReport:
    """Full accuracy/timing/complexity report for several detectors."""
    rows = []
    for det in detectors:
        accuracy = evaluate_accuracy(det, ds)
        times = measure_time(det, ds, repetitions)
        try:
            complexity = fit_complexity(times)
        except (TooFewPoints, DegenerateSpan):
            complexity = None
        notes = getattr(getattr(det, "spec", None), "notes", "")
        rows.append(BenchRow(detector=det.name, accuracy=accuracy,
                             times=times, complexity=complexity,
                             observations=notes))
    return BenchReport(rows=rows)
