"""Exception hierarchy; every error renders to the `{"error": ...}` payload the CLI prints."""


class AuctionLabError(Exception):
    """Base class of all library errors."""

    exit_code = 1

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    def to_dict(self) -> dict:
        return {"error": self.message, **self.context}


class DimensionMismatch(AuctionLabError):
    exit_code = 2


class SizeGuardExceeded(AuctionLabError):
    exit_code = 2

    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"{what}: size {size} exceeds limit {limit}", size=size, limit=limit)


class ValuationKindError(AuctionLabError):
    exit_code = 2


class PreconditionViolated(AuctionLabError):
    pass


class InvalidScript(AuctionLabError):
    pass


class ScenarioError(AuctionLabError):
    exit_code = 2

    def __init__(self, message: str, field: str = None, line: int = None):
        super().__init__(message, field=field, line=line)
        self.field = field
        self.line = line


class TraceMismatch(AuctionLabError):
    def __init__(self, message: str, step: int, field: str = None):
        super().__init__(message, step=step, field=field)
        self.step = step
        self.field = field


class NonQualifyingTrace(AuctionLabError):
    pass


class UnknownExperiment(AuctionLabError):
    exit_code = 2

    def __init__(self, name: str):
        super().__init__(f"unknown experiment: {name}", name=name)
