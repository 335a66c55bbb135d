"""Exception hierarchy used across the package."""


class ShipPerfError(Exception):
    """Base class for all package errors."""


class InvalidParticularsError(ShipPerfError, ValueError):
    pass


class InvalidParameterError(ShipPerfError, ValueError):
    pass


class DomainError(ShipPerfError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidityError(ShipPerfError, ValueError):
    """A semi-empirical theory was evaluated outside its validity range."""


class InsufficientDataError(ShipPerfError, ValueError):
    pass


class DegenerateFitError(ShipPerfError, ValueError):
    """The regression design matrix is rank deficient.

    Attributes:
        columns: names of the columns taking part in the linear dependency.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class IntegrationError(ShipPerfError, RuntimeError):
    def __init__(self, message, achieved_tolerance=float("nan")):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class IncompleteCoefficientsError(ShipPerfError, KeyError):
    def __init__(self, parameter, ship_type=None):
        where = f" for ship type {ship_type!r}" if ship_type else ""
        super().__init__(f"missing coefficient entry {parameter!r}{where}")
        self.parameter = parameter

    def __str__(self):
        return self.args[0]


class SchemaError(ShipPerfError, ValueError):
    """A file is malformed, truncated, or carries an unsupported schema tag."""


class ModelCorruptError(ShipPerfError, ValueError):
    pass


class TrainingDivergedError(ShipPerfError, RuntimeError):
    def __init__(self, epoch, loss_trace=()):
        super().__init__(f"training diverged (non-finite loss) in epoch {epoch}")
        self.epoch = epoch
        self.loss_trace = list(loss_trace)


class OrderingError(ShipPerfError, ValueError):
    pass


class FoldError(ShipPerfError, ValueError):
    pass


class UndefinedMetricError(ShipPerfError, ValueError):
    pass


class UnknownTheoryError(ShipPerfError, LookupError):
    def __init__(self, name, registered=()):
        names = ", ".join(sorted(registered))
        super().__init__(f"unknown wave theory {name!r}; registered: {names}")
        self.name = name
        self.registered = tuple(sorted(registered))

    def __str__(self):
        return self.args[0]
