"""Exception types shared across the library.

The CLI maps these onto exit codes: domain rejections exit 1, usage and
configuration problems exit 2, I/O and file-format problems exit 3.
"""


class SiftPlateError(Exception):
    """Base class for every error raised by this library."""


class DimensionError(SiftPlateError):
    """An image or raster does not meet a size / shape precondition."""


class ParameterError(SiftPlateError):
    """A numeric parameter is outside its valid domain."""


class DegenerateConfigurationError(SiftPlateError):
    """Point configuration too degenerate for a geometric estimate."""


class InsufficientDataError(SiftPlateError):
    """Fewer data points than the estimator's minimal sample size."""


class DegenerateProjectionError(SiftPlateError):
    """A projected point fell on (or numerically at) the plane at infinity."""


class DuplicateLabelError(SiftPlateError):
    """Attempt to enroll a template label that already exists."""


class InsufficientFeaturesError(SiftPlateError):
    """A template image yielded too few keypoints to be usable."""


class MalformedRegistryError(SiftPlateError):
    """Registry file is truncated or structurally invalid."""


class RegistryVersionError(SiftPlateError):
    """Registry file carries an unsupported format version."""


class ParamsMismatchError(SiftPlateError):
    """Feature extraction parameters do not match the registry's."""


class ConfigurationError(SiftPlateError):
    """Invalid pipeline configuration (bad key, value, or combination)."""


class ManifestError(SiftPlateError):
    """Evaluation manifest file could not be parsed."""


class ImageFormatError(SiftPlateError):
    """Image file is not a readable PGM/PPM/PNG raster."""
