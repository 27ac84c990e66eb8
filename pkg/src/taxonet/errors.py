"""Exception hierarchy shared across the package."""


class TaxonetError(Exception):
    """Base class for all domain errors raised by taxonet."""


class ValidationError(TaxonetError, ValueError):
    """Invalid argument: bad shape, out-of-range value, broken invariant."""


class NonFiniteError(ValidationError):
    """An array that must be finite contains NaN or Inf."""


class NonFiniteGradientError(NonFiniteError):
    """A parameter gradient went non-finite; message names the parameter."""


class TrainingDivergedError(TaxonetError):
    def __init__(self, epoch: int, batch: int, lr: float, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        self.loss = loss
        super().__init__(
            f"training loss became non-finite ({loss!r}) at epoch {epoch}, "
            f"batch {batch}, lr {lr:g}"
        )


class CheckpointError(TaxonetError):
    """Base class for checkpoint file problems."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class CheckpointTruncatedError(CheckpointError):
    """File ends before the declared weight blob is complete."""


class CheckpointShapeError(CheckpointError):
    """Weight blob length does not match the architecture."""


class PpmError(TaxonetError, ValueError):
    """Base class for PPM/PGM decode problems."""


class PpmFormatError(PpmError):
    """Unsupported magic, maxval, or malformed header."""


class PpmTruncatedError(PpmError):
    """Pixel data ends early (or the file carries trailing bytes)."""


class TaxonomyError(TaxonetError):
    """Malformed class tree or unresolvable class reference."""


class AmbiguousAliasError(TaxonomyError):
    """Two equal-length alias patterns match the same title."""

    def __init__(self, title: str, candidates):
        self.title = title
        self.candidates = list(candidates)
        super().__init__(
            f"title {title!r} matches multiple equal-length aliases: "
            + ", ".join(f"{p!r} -> {c}" for p, c in self.candidates)
        )


class ManifestError(TaxonetError):
    """Malformed corpus manifest or sample record."""


class UsageError(TaxonetError):
    """Bad command-line invocation (maps to exit code 2)."""
