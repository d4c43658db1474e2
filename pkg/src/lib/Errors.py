class PrzkError(Exception):
    pass

class GroupError(PrzkError):
    pass

class IdentityError(PrzkError):
    pass

class RegistryError(PrzkError):
    def __init__(self, message: str, index: int | None = None) -> None:
        if index is not None:
            message = "record {} (line {}): {}".format(index, index + 1, message)
        super().__init__(message)
        self.index: int | None = index

class MessageDecodeError(PrzkError):
    pass

class StateMachineError(PrzkError):
    pass

class ExtractionError(PrzkError):
    pass

class AttackError(PrzkError):
    pass

class ConfigError(PrzkError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__("{}: {}".format(field, message))
        self.field: str = field

class SimulationError(PrzkError):
    def __init__(self, message: str, index: int | None = None) -> None:
        if index is not None:
            message = "session {}: {}".format(index, message)
        super().__init__(message)
        self.index: int | None = index

class SessionDeadlockError(SimulationError):
    pass

class ReportIntegrityError(PrzkError):
    def __init__(self, metric: str, stored: object, derived: object) -> None:
        super().__init__("aggregate '{}' does not match session rows (stored {!r}, derived {!r})".format(
            metric, stored, derived
        ))
        self.metric: str = metric
