"""Exception hierarchy shared by every stage of the pipeline."""


class TrajSRError(Exception):
    """Base class; the CLI turns these into a one-line error and exit code 1."""

    kind = "error"


class InvalidArgument(TrajSRError, ValueError):
    kind = "invalid-argument"


class LoadError(TrajSRError):
    kind = "load"


class NotFound(TrajSRError, KeyError):
    kind = "not-found"

    def __str__(self) -> str:
        # KeyError quotes its argument; keep plain messages
        return str(self.args[0]) if self.args else ""


class Unreachable(TrajSRError):
    kind = "unreachable"


class EmptySubgraph(TrajSRError):
    kind = "empty-subgraph"


class DegenerateEdge(TrajSRError):
    kind = "degenerate-edge"


class GenerationFailed(TrajSRError):
    kind = "generation-failed"


class ShapeError(TrajSRError, ValueError):
    kind = "shape"


class NumericError(TrajSRError, FloatingPointError):
    kind = "numeric"


class OptimizerError(TrajSRError):
    kind = "optimizer"


class SequenceTooLong(TrajSRError, ValueError):
    kind = "sequence-too-long"


class TrainingError(TrajSRError):
    kind = "training"


class ReconstructionError(TrajSRError):
    kind = "reconstruction"


class UnmatchedPoint(TrajSRError):
    kind = "unmatched-point"


class BrokenChain(TrajSRError):
    kind = "broken-chain"


class CheckpointError(TrajSRError):
    kind = "checkpoint"


class ConfigError(TrajSRError):
    kind = "config"
