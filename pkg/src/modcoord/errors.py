"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 for malformed input, 2 for scenarios that violate the model assumptions,
3 for numerical failures.
"""


class ModCoordError(Exception):
    exit_code = 1


class ScenarioError(ModCoordError):
    exit_code = 1


class ParseError(ScenarioError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingField(ScenarioError):
    def __init__(self, field):
        self.field = field
        super().__init__(field)


class GraphError(ModCoordError):
    exit_code = 2


class NotConnected(GraphError):
    pass


class NonStochasticRouting(GraphError):
    pass


class AsymmetricEdges(GraphError):
    pass


class AssumptionViolated(ModCoordError):
    exit_code = 2


class DeltaMaxUndefined(AssumptionViolated):
    pass


class DimensionMismatch(ModCoordError, ValueError):
    pass


class NegativeDt(ModCoordError, ValueError):
    pass


class BadBounds(ModCoordError, ValueError):
    pass


class Misaligned(ModCoordError, ValueError):
    pass


class NumericalFailure(ModCoordError):
    exit_code = 3


class BoundaryState(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class LeftDomain(NumericalFailure):
    pass


class SingularJM(NumericalFailure):
    pass


class Infeasible(NumericalFailure):
    pass
