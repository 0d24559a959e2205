"""Exception types raised across the toolkit.

Every domain failure maps to one class here so the CLI can report
``<ErrorName>: <message>`` with exit code 1 and no traceback.
"""


class PackLabError(Exception):
    """Base class for all toolkit errors."""


# binary parsing -------------------------------------------------------------

class UnknownFormat(PackLabError):
    """Input bytes carry no recognized executable magic."""


class Truncated(PackLabError):
    """A header references data beyond the end of the file."""


class MalformedHeader(PackLabError):
    """Header fields are internally inconsistent."""


class FileTooLarge(PackLabError):
    """Input exceeds the maximum accepted file size."""


# entropy --------------------------------------------------------------------

class EmptyInput(PackLabError):
    """Entropy of an empty byte sequence is undefined."""


class BlockSizeTooSmall(PackLabError):
    """Block entropy needs blocks of at least 16 bytes."""


# detection ------------------------------------------------------------------

class FormatUnsupported(PackLabError):
    """Detector does not support the executable's format."""


class WeakModeUnsupported(PackLabError):
    """Detector has no weak detection mode."""


class ExternalCommandFailed(PackLabError):
    """External detector command exited abnormally."""


class EmptyIndicatorSet(PackLabError):
    """Risk scoring needs at least one indicator."""


class TooFewDetectors(PackLabError):
    """Voting needs at least two eligible detectors."""


class BadSignature(PackLabError):
    """Signature database entry cannot be parsed."""


# packing --------------------------------------------------------------------

class PackingFailed(PackLabError):
    """A packing step could not be applied to the sample."""


# datasets -------------------------------------------------------------------

class UnlabeledSample(PackLabError):
    """Ingested sample has no label source."""


class EmptySourcePool(PackLabError):
    """No clean source samples available for generation."""


class AllPackingFailed(PackLabError):
    """Every packing attempt during generation failed."""


class LabelConflict(PackLabError):
    """Same sample hash carries two different labels."""


class UnknownFeature(PackLabError):
    """Derived feature expression references an undeclared name."""


class MissingFeature(PackLabError):
    """Dataset lacks a feature the model requires."""


# models ---------------------------------------------------------------------

class UnknownAlgorithm(PackLabError):
    """Requested algorithm is not in the registry."""


class UnsupportedAlgorithmKind(PackLabError):
    """Algorithm is declared but has no backing implementation."""


class SingleClassDataset(PackLabError):
    """Training needs samples from at least two classes."""


class TooFewSamples(PackLabError):
    """Training set is too small for the requested validation."""


class CorruptDump(PackLabError):
    """Model dump cannot be decoded."""


class VersionMismatch(PackLabError):
    """Model dump was written by an incompatible schema version."""


# benchmarking ---------------------------------------------------------------

class EmptyDataset(PackLabError):
    """Benchmark input dataset holds no usable samples."""


class TooFewPoints(PackLabError):
    """Complexity fitting needs at least five timing points."""


class DegenerateSpan(PackLabError):
    """Timing points span less than two size octaves."""


# visualization --------------------------------------------------------------

class ParseFailed(PackLabError):
    """A sample requested for plotting could not be parsed."""
