"""Exception types raised across lexiphish.

Input and usage problems derive from :class:`InputError`; numerical failures
derive from :class:`NumericError`. The CLI maps the first to exit code 2 and
the second to exit code 3.
"""


class LexiphishError(Exception):
    pass


class InputError(LexiphishError, ValueError):
    pass


class NumericError(LexiphishError, ArithmeticError):
    pass


# url-features
class EmptyUrl(InputError):
    pass


class BatchEmpty(InputError):
    pass


# data pipeline
class MissingColumn(InputError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class EmptyFile(InputError):
    pass


class TooFewSamples(InputError):
    pass


class SchemaMismatch(InputError):
    pass


# tensor engine
class ShapeMismatch(InputError):
    pass


class BatchTooSmall(InputError):
    pass


class NonFiniteError(NumericError):
    pass


# model
class NonFiniteLoss(NumericError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.value = value


class EmptyTestSet(InputError):
    pass


class CheckpointError(InputError):
    pass


class VersionMismatch(CheckpointError):
    def __init__(self, found, expected):
        super().__init__(f"checkpoint format version {found!r}, this build reads version {expected!r}")
        self.found = found
        self.expected = expected


class CorruptChecksum(CheckpointError):
    pass


# baselines
class EmptyTrainSet(InputError):
    pass


class KTooLarge(InputError):
    pass


# explain
class SubsetTooLarge(InputError):
    pass


class EmptySample(InputError):
    pass
