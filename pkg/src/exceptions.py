"""
Exception hierarchy shared by the library and the command line.
"""


class SpecLearnError(Exception):
    """Base class for every domain failure raised by this package."""


class PlacementFailure(SpecLearnError):
    """Rejection sampling could not place an object within its attempt budget."""


class SynthesisFailure(SpecLearnError):
    """A demonstration label bucket could not be filled for a scene."""


class SchemaError(SpecLearnError):
    """A file on disk does not match the expected layout or version."""


class ShapeError(SpecLearnError, ValueError):
    """Array operands disagree on shape."""


class UntrainedModelError(SpecLearnError):
    """A model still holds its initial parameters."""


class ConfigError(SpecLearnError):
    """The experiment configuration could not be loaded or validated."""


class AcceptanceGateFailure(SpecLearnError):
    """A result broke a structural expectation that gates the run."""
