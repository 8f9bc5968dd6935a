"""Engine error hierarchy. Every error carries a stable string code that is
also used verbatim by the HTTP layer and the adapter protocol."""


class EngineError(Exception):
    code = "ENGINE_ERROR"

    def __init__(self, message=""):
        super().__init__(message or self.code)
        self.message = message or self.code


class DimensionMismatch(EngineError):
    code = "DIMENSION_MISMATCH"


class EmptyMask(EngineError):
    code = "EMPTY_MASK"


class EmptyPrompt(EngineError):
    code = "EMPTY_PROMPT"


class UnknownToken(EngineError):
    code = "UNKNOWN_TOKEN"


class InvalidConfig(EngineError):
    code = "INVALID_CONFIG"


class InvalidLoss(EngineError):
    code = "INVALID_LOSS"


class InvalidGradient(EngineError):
    code = "INVALID_GRADIENT"


class NumericalBreakdown(EngineError):
    code = "NUMERICAL_BREAKDOWN"


class UnknownModel(EngineError):
    code = "UNKNOWN_MODEL"


class Busy(EngineError):
    code = "BUSY"


class NotCompleted(EngineError):
    code = "NOT_COMPLETED"


class AlreadyAccepted(EngineError):
    code = "ALREADY_ACCEPTED"


class AdapterTimeout(EngineError):
    code = "ADAPTER_TIMEOUT"


class AdapterProtocolError(EngineError):
    code = "ADAPTER_PROTOCOL_ERROR"
