"""Exception hierarchy. Validation failures exit 1, runtime failures exit 2."""


class FedsemrecError(Exception):
    """Base class for all toolkit errors."""


class ValidationFailure(FedsemrecError):
    """Bad input, config, or file content. CLI exit code 1."""


class DataError(ValidationFailure):
    """Malformed records, unknown references, or unusable sequences."""


class FormatError(ValidationFailure):
    """Corrupt or mismatched binary artifact (embedding files, checkpoints)."""


class ProtocolError(ValidationFailure):
    """Bad federation wire message or inconsistent client uploads."""


class ConfigError(ValidationFailure):
    """Unknown key, out-of-range value, or unmet precondition in a config."""


class ShapeError(ValidationFailure):
    """Dimension mismatch between tensors, states, or embedding tables."""


class PromptError(ValidationFailure):
    """Prompt assembly failed (unknown target token or overlong prompt)."""


class StateError(ValidationFailure):
    """Optimizer state or cached artifact inconsistent with its owner."""


class RuntimeFailure(FedsemrecError):
    """Failure during training or pipeline execution. CLI exit code 2."""


class TrainingError(RuntimeFailure):
    """Non-finite loss or divergence during an optimization loop."""
