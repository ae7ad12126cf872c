class RobustcheckError(Exception):
    pass


class ParseError(RobustcheckError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class EnvError(ParseError):
    """A variable is used without a declaration (or declared twice)."""


class LabelError(ParseError):
    """Two endorsements share a label."""


class ReservedVarError(RobustcheckError):
    pass


class ArityError(RobustcheckError):
    pass


class UnsupportedConstruct(RobustcheckError):
    pass


class ScaleError(RobustcheckError):
    pass
