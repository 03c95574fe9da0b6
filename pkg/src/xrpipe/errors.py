"""Exception hierarchy shared by every xrpipe module."""


class XrPipeError(Exception):
    """Base class for all errors raised by xrpipe."""


# toy stream container

class StreamError(XrPipeError):
    pass


class BadMagic(StreamError):
    pass


class TruncatedInput(StreamError):
    pass


class InvariantViolation(StreamError, ValueError):
    pass


class DecodeError(StreamError):
    pass


# input formatting

class FormattingError(XrPipeError):
    pass


class EmptyResult(FormattingError):
    pass


class UnknownTile(FormattingError):
    pass


class DtsOrderViolation(FormattingError):
    pass


class PositionOutOfRange(FormattingError, IndexError):
    pass


class ParameterMismatch(FormattingError):
    pass


class EmptyInput(FormattingError):
    pass


class FrameStructureMismatch(FormattingError):
    pass


class LayoutArityMismatch(FormattingError):
    pass


# video decoding engine

class EngineError(XrPipeError):
    pass


class UnknownCodecProfile(EngineError):
    pass


class InsufficientCapacity(EngineError):
    pass


class UnknownGroup(EngineError):
    pass


class UnknownInstance(EngineError):
    pass


class OversizedPicture(EngineError):
    pass


class InvalidState(EngineError):
    pass


class ZeroCapacity(EngineError, ValueError):
    pass


class UnknownParameter(EngineError, KeyError):
    pass


class CropOutOfBounds(EngineError, ValueError):
    pass


class NoOutputBuffer(EngineError):
    pass


class ProfileMismatch(EngineError):
    pass


# circular buffer

class CircularBufferError(XrPipeError):
    pass


class Empty(CircularBufferError):
    pass


class NotStored(CircularBufferError, LookupError):
    pass


class NoFrameAtOrBefore(CircularBufferError, LookupError):
    pass


# scene description

class SceneError(XrPipeError):
    """Raised by :func:`xrpipe.scene.parse_scene`; carries every violation found."""

    code = "SceneError"

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class MalformedDocument(SceneError):
    code = "MalformedDocument"


class DanglingReference(SceneError):
    code = "DanglingReference"


class CycleDetected(SceneError):
    code = "CycleDetected"


class TimedWithoutCircular(SceneError):
    code = "TimedWithoutCircular"


class VideoTextureNotTimed(SceneError):
    code = "VideoTextureNotTimed"


class InvalidAudioGraph(SceneError):
    code = "InvalidAudioGraph"


# scene updates

class PatchFormatError(XrPipeError, ValueError):
    pass


class DanglingAfterRemove(XrPipeError):
    def __init__(self, array, index, paths):
        self.array = array
        self.index = index
        self.paths = list(paths)
        super().__init__(
            f"{array}[{index}] removed while still referenced from {', '.join(self.paths)}"
        )


class TransactionFailed(XrPipeError):
    """The whole transaction was rolled back.

    ``op_index`` is the failing operation, or ``None`` when every operation
    applied but the resulting document did not validate.
    """

    def __init__(self, op_index, reason, detail=""):
        self.op_index = op_index
        self.reason = reason
        self.detail = detail
        where = "result" if op_index is None else f"op {op_index}"
        super().__init__(f"{reason} at {where}: {detail}" if detail else f"{reason} at {where}")


# media access function

class PipelineError(XrPipeError):
    pass


class AdmissionFailed(PipelineError):
    def __init__(self, request, cause):
        self.request = request
        self.cause = cause
        super().__init__(f"could not admit {request}: {cause}")


class MissingMedia(PipelineError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing media"


class ScenarioError(PipelineError, ValueError):
    pass
