"""Exception types raised by laserflash."""


class LaserFlashError(Exception):
    pass


class InvalidParameterError(LaserFlashError, ValueError):
    pass


class AssemblyError(LaserFlashError):
    pass


class SolverError(LaserFlashError):
    pass


class SurrogateBuildError(SolverError):
    pass


class OutOfBoxError(LaserFlashError, ValueError):
    """Parameter point lies outside the surrogate box; the caller should fall back."""


class ConfigError(LaserFlashError, ValueError):
    pass


class ThermogramParseError(LaserFlashError, ValueError):
    pass


class SurrogateMismatchError(LaserFlashError):
    """Surrogate file was built under different physics/discretization than the config."""


class SamplerError(LaserFlashError):
    pass
