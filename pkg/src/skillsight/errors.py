"""Exception types shared across the package."""


class SkillSightError(Exception):
    """Base class for all package-specific errors."""


class FormatError(SkillSightError, ValueError):
    """Malformed on-disk data; the message names the offending field."""


class EmptyInputError(SkillSightError, ValueError):
    """An operation received an empty sequence it cannot work with."""


class InvalidAnchorError(SkillSightError, ValueError):
    """Normalization was asked to anchor on an invalid first sample.

    Carries ``first_valid_index`` so the caller can re-anchor.
    """

    def __init__(self, message: str, first_valid_index: int | None):
        super().__init__(message)
        self.first_valid_index = first_valid_index


class ConfigError(SkillSightError, ValueError):
    """Invalid configuration value or schema violation."""


class UnsupportedModalityError(SkillSightError, ValueError):
    """A model was given a recording lacking a modality it requires."""


class TrainingDivergedError(SkillSightError, RuntimeError):
    """Training hit a non-finite loss; message carries diagnostics."""
