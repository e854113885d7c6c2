"""Exception hierarchy shared by every psjnet module."""


class PSJNetError(Exception):
    """Base class for all library errors."""


class ShapeError(PSJNetError, ValueError):
    pass


class RankError(PSJNetError, ValueError):
    pass


class NumericsError(PSJNetError, FloatingPointError):
    pass


class VocabError(PSJNetError, KeyError):
    pass


class ConfigError(PSJNetError, ValueError):
    pass


class NormalizationError(PSJNetError, ArithmeticError):
    pass


class JoinError(PSJNetError, ValueError):
    pass


class EmptyLossError(PSJNetError, ValueError):
    pass


class TrainingError(PSJNetError, RuntimeError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(f"{message} (epoch={epoch}, batch={batch})")
        self.epoch = epoch
        self.batch = batch


class SimulationError(PSJNetError, RuntimeError):
    def __init__(self, message, stage=None):
        super().__init__(message if stage is None else f"{message} [stage: {stage}]")
        self.stage = stage


class FormatError(PSJNetError, ValueError):
    pass


class SplitError(PSJNetError, ValueError):
    pass


class ParseError(PSJNetError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message if column is None else f"{message} (column {column})")
        self.column = column


class DegenerateTestError(PSJNetError, ArithmeticError):
    pass


class CheckpointError(PSJNetError, ValueError):
    pass
