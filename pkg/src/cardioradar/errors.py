"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``code`` so the command line
can report failures on a single parseable line.
"""


class CardioRadarError(Exception):
    code = "error"


class InvalidArgument(CardioRadarError, ValueError):
    code = "invalid_argument"


class FormatError(CardioRadarError, ValueError):
    code = "format_error"


class NoTargetError(CardioRadarError):
    code = "no_target"


class LabelingFailed(CardioRadarError):
    code = "labeling_failed"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SyncFailed(CardioRadarError):
    code = "sync_failed"


class AlignmentFailed(CardioRadarError):
    code = "alignment_failed"


class InsufficientData(CardioRadarError):
    code = "insufficient_data"


class UndefinedSNR(CardioRadarError, ZeroDivisionError):
    code = "undefined_snr"
