"""Error taxonomy shared across the package.

Every failure the library can diagnose is raised as a ZnqError subclass so
callers (CLI, HTTP service, fuzzers) can catch one base type and rely on
``code`` for machine-readable dispatch.
"""


class ZnqError(Exception):
    """Base class for all diagnosable failures."""

    code = "Error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_json(self):
        out = {"code": self.code, "message": self.message}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


# --- network structure ------------------------------------------------------

class CycleDetected(ZnqError):
    code = "CycleDetected"


class ShapeMismatch(ZnqError):
    code = "ShapeMismatch"


class NegativeDimension(ZnqError):
    code = "NegativeDimension"


class InPlaceViolation(ZnqError):
    code = "InPlaceViolation"


class UnsupportedLayer(ZnqError):
    code = "UnsupportedLayer"


class UnresolvedBottom(ZnqError):
    code = "UnresolvedBottom"


# --- text format -------------------------------------------------------------

class ParseError(ZnqError):
    """Base for text-format failures; carries a source span when known."""

    code = "SyntaxError"

    def __init__(self, message, span=None, expected=None):
        super().__init__(message)
        self.span = span            # SourceSpan or None
        self.expected = expected or []

    def to_json(self):
        out = {"code": self.code, "message": self.message}
        if self.span is not None:
            out["span"] = {
                "line": self.span.line,
                "col": self.span.col,
                "length": self.span.length,
            }
        if self.expected:
            out["expected"] = list(self.expected)
        return out


class DuplicateLayerName(ParseError):
    code = "DuplicateLayerName"


# --- binary containers -------------------------------------------------------

class BadMagic(ZnqError):
    code = "BadMagic"


class VersionUnsupported(ZnqError):
    code = "VersionUnsupported"


class TruncatedFile(ZnqError):
    code = "TruncatedFile"


class DimMismatch(ZnqError):
    code = "DimMismatch"


# --- execution ---------------------------------------------------------------

class MissingWeights(ZnqError):
    code = "MissingWeights"


class NonFiniteResult(ZnqError):
    code = "NonFiniteResult"


# --- accelerator -------------------------------------------------------------

class UnsupportedForAccelerator(ZnqError):
    code = "UnsupportedForAccelerator"


class LineTooWide(ZnqError):
    code = "LineTooWide"


class CacheOverflow(ZnqError):
    code = "CacheOverflow"
