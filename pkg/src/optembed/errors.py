"""Exception taxonomy shared by all optembed modules."""


class OptEmbedError(Exception):
    """Base class for every domain error raised by this package."""


class InvalidBounds(OptEmbedError):
    """Interval with lo > hi, or binary variable bounds outside [0, 1]."""


class ForeignVariable(OptEmbedError):
    """A VariableRef was used with a Model that does not own it."""


class InvalidSOS(OptEmbedError):
    """SOS1 weights are not pairwise distinct positive reals."""


class IncompleteAssignment(OptEmbedError):
    """An assignment vector does not cover every referenced variable."""


class ParseError(OptEmbedError):
    """Malformed predictor or model JSON. Carries the offending JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DimensionError(OptEmbedError):
    """Incompatible predictor / input dimensions."""


class UnboundedInput(OptEmbedError):
    """A formulation needing finite input intervals saw an infinite one."""


class UnsupportedReducedSpace(OptEmbedError):
    """The predictor kind has no reduced-space formulation."""


class NonDifferentiablePredictor(OptEmbedError):
    """The predictor kind is not supported by the derivative oracle engine."""


class HessianUnavailable(OptEmbedError):
    """Oracle was built without Hessian support (with_hessian=False)."""


class NonlinearNotExportable(OptEmbedError):
    """LP export hit nonlinear constraints. Carries their indices."""

    def __init__(self, indices: list[int]):
        super().__init__(f"nonlinear constraints not expressible in LP format: {indices}")
        self.indices = list(indices)


class OracleNotExportable(OptEmbedError):
    """LP export cannot represent oracle (callback) constraints."""


class InvalidConfig(OptEmbedError):
    """Inconsistent FormulationConfig options."""
