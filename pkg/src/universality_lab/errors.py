"""Exception hierarchy shared by all modules.

Every domain error derives from :class:`LabError` so the CLI can map them to
exit code 1 and serialize them as JSON.
"""


class LabError(Exception):
    """Base class for domain errors."""

    code = "lab_error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        for key, value in self.details.items():
            if isinstance(value, complex):
                value = [value.real, value.imag]
            out[key] = value
        return out


class PreconditionError(LabError, ValueError):
    code = "precondition_violation"


class UnsupportedRepresentation(PreconditionError):
    code = "unsupported_representation"


class PoleHit(LabError, ArithmeticError):
    code = "pole_hit"


class NonConvergence(LabError, ArithmeticError):
    code = "non_convergence"


class NotAFixedPoint(PreconditionError):
    code = "not_a_fixed_point"


class NotInBasin(LabError):
    code = "not_in_basin"


class NotInChart(LabError):
    code = "not_in_chart"


class NotInPetal(LabError):
    code = "not_in_petal"


class OutOfRange(LabError):
    code = "out_of_range"


class BranchAmbiguity(LabError):
    code = "branch_ambiguity"


class DegenerateFit(LabError):
    code = "degenerate_fit"


class IllConditioned(LabError):
    code = "ill_conditioned"


class NoDisjointN(LabError):
    code = "no_disjoint_n"


class ApproximationFailed(LabError):
    code = "approximation_failed"


class InjectivityViolated(LabError):
    code = "injectivity_violated"


class DegreeCapExceeded(LabError):
    code = "degree_cap_exceeded"


class PetalCountTooSmall(PreconditionError):
    code = "petal_count_too_small"


class ChartConstructionError(LabError):
    code = "chart_construction_failed"
