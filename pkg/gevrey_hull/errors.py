'''Exception hierarchy shared by every module of the package.

All errors raised on purpose derive from HullError so that callers (the CLI
in particular) can tell a numerical or input failure apart from a bug.
'''


class HullError(Exception):
    pass


class DimensionMismatch(HullError):
    pass


class AliasingBudgetExceeded(HullError):
    pass


class SymmetryViolation(HullError):
    pass


class NearSingular(HullError):
    pass


class NondegeneracyLost(NearSingular):
    pass


class DegenerateFrequency(HullError):
    pass


class NonzeroAverage(HullError):
    pass


class ResonantMode(HullError):
    def __init__(self, k, divisor, floor):
        super().__init__(
            'Resonant mode k={k}: |divisor|={d:.3e} < floor {f:.3e}'.format(
                k=tuple(int(x) for x in k), d=divisor, f=floor
            )
        )
        self.k = tuple(int(x) for x in k)
        self.divisor = divisor
        self.floor = floor


class CompositionDomainExceeded(HullError):
    pass


class NeumannDivergence(HullError):
    pass


class NoConvergence(HullError):
    pass


class BoundViolated(HullError):
    pass


class InsufficientHistory(HullError):
    pass


class FormatError(HullError):
    pass


class ConfigParseError(HullError):
    pass


class ConfigValidationError(HullError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            'Invalid configuration:\n' + '\n'.join(
                '  {v}'.format(v=v) for v in self.violations
            )
        )
