"""Exception types shared across the package.

Each class carries the process exit code the CLI maps it to.
"""


class LgmError(Exception):
    exit_code = 1


class ParseError(LgmError, ValueError):
    exit_code = 2


class ShapeMismatch(ParseError):
    pass


class NonFiniteSample(ParseError):
    pass


class DegenerateInput(LgmError, ValueError):
    exit_code = 3


class TooFewSamples(DegenerateInput):
    pass


class EmptyInput(DegenerateInput):
    pass


class DegenerateDensity(LgmError, ArithmeticError):
    exit_code = 4


class NoConvergence(LgmError, ArithmeticError):
    exit_code = 4


class MismatchedData(LgmError, ValueError):
    exit_code = 3


class ManifestError(LgmError):
    exit_code = 5


class ManifestParseError(ManifestError, ParseError):
    exit_code = 5


class DuplicateKey(ManifestError):
    pass
