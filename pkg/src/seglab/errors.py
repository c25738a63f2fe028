"""Exception types shared across the package."""


class SegLabError(Exception):
    """Base class for all errors raised by seglab."""


class ConfigError(SegLabError):
    """Bad experiment configuration: unknown key, type mismatch, missing key."""


class DataFormatError(SegLabError):
    """Input data violates the expected format (channels, dtype, mask values)."""


class ShapeError(SegLabError):
    """Array or tensor shape violates an interface contract."""


class WeightLoadError(SegLabError):
    """Pretrained encoder weights do not match the encoder architecture."""


class TrainingDiverged(SegLabError):
    """Training produced a non-finite loss and was aborted."""

    def __init__(self, message: str, epoch: int, batch: int, lr: float):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
