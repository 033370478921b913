"""Exception hierarchy shared across the package.

Every error carries a CLI exit code so the command layer can map failures
without a lookup table: 3 for data/schema problems, 4 for numeric failures.
"""


class PotaError(Exception):
    exit_code = 3


class ShapeError(PotaError, ValueError):
    pass


class SchemaError(PotaError, ValueError):
    pass


class DegenerateFeatureError(SchemaError):
    pass


class EncodeError(PotaError, ValueError):
    pass


class SplitError(PotaError, ValueError):
    pass


class BatchError(PotaError, ValueError):
    pass


class EdgeLookupError(PotaError, KeyError):
    pass


class ConfigError(PotaError, ValueError):
    pass


class GenerationError(PotaError, ValueError):
    pass


class FormatError(PotaError, ValueError):
    """Malformed region/model/config file; message names file and line."""


class TrainingError(PotaError, RuntimeError):
    exit_code = 4

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class GradientCheckError(PotaError, RuntimeError):
    exit_code = 4
