"""Exception hierarchy shared by every module in the package."""


class PomdpError(Exception):
    """Base class for all package errors."""


class StepOnTerminal(PomdpError):
    """A generative model was asked to step from an absorbing state."""


class InvalidAction(PomdpError):
    """Action index outside the domain's action table."""


class Unsupported(PomdpError):
    """The domain does not implement an optional capability."""


class Unenumerable(Unsupported):
    """Exact computation requested on a domain without a finite state list."""


class ZeroEvidence(PomdpError):
    """Observation has zero probability under the predictive distribution."""


class BeliefDepleted(PomdpError):
    """No particle survived the update, even after oversampling."""


class EmptyBelief(PomdpError):
    pass


class BudgetZero(PomdpError):
    pass


class HorizonTooDeep(PomdpError):
    pass


class ConfigError(PomdpError):
    """Invalid scenario or command-line configuration."""


class UnknownPolicy(ConfigError):
    pass


class SchemaError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DanglingReference(ConfigError):
    def __init__(self, path: str, ref: str):
        super().__init__(f"{path}: unknown asset id {ref!r}")
        self.path = path
        self.ref = ref
