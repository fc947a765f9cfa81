"""Exception hierarchy shared by every afb module."""


class AfbError(Exception):
    """Base class for all errors raised by afb."""


class ConfigError(AfbError, ValueError):
    """Invalid configuration value (bad parameter, sample-rate mismatch, unknown key)."""


class ArgumentError(AfbError, ValueError):
    """A call argument is out of range or inconsistent with its companions."""


class InputError(AfbError, ValueError):
    """Signal input is unusable, e.g. too short or non-finite."""


class DatasetError(AfbError):
    """Corpus layout problem; the message names the offending word or file."""


class UnsupportedFormatError(AfbError):
    """Audio file is valid RIFF/WAVE but not PCM16 mono at the expected rate."""


class WavParseError(AfbError):
    """Audio file header is corrupt or not RIFF/WAVE at all."""


class TrainingDivergedError(AfbError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class ContainerError(AfbError):
    """Binary spectrogram or checkpoint container is malformed."""
