"""Exception types shared across the package; the CLI maps them to exit codes."""


class ConfigError(ValueError):
    """Invalid configuration or hyperparameter."""


class DataError(ValueError):
    """Input data failed validation."""


class IngestionError(DataError):
    """A file or join could not be ingested as a whole."""


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, value: float):
        super().__init__(f"non-finite total loss {value!r} at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step
        self.value = value
        self.history = None  # the trainer attaches the partial history here
