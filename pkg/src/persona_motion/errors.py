"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """A configuration value is invalid."""


class UsageError(RuntimeError):
    """An API was called in a state that does not support it."""


class RegistryError(KeyError):
    """Unknown content identifier."""


class BoundsError(IndexError):
    """An index range falls outside the clip."""


class TemplateError(KeyError):
    """Unknown description template variant."""


class VocabularyError(KeyError):
    """Token is not part of the vocabulary."""


class PromptError(ValueError):
    """Prompt lacks the structure an operation needs."""


class IntegrityError(RuntimeError):
    """Stored data or a training invariant failed verification."""


class BatchError(ValueError):
    """A batch does not satisfy its construction contract."""


class DataError(ValueError):
    """The corpus cannot satisfy a sampling request."""


class ContractError(ValueError):
    """Inputs violate a documented numeric contract."""


class NumericError(ArithmeticError):
    """A numeric routine failed beyond tolerance."""


class ProtocolError(RuntimeError):
    """An evaluation protocol precondition was not met."""


class StageOrderError(RuntimeError):
    """A pipeline stage was run before the stage it depends on."""
