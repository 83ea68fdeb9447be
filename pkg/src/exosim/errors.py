"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model parameter or assembly structure."""


class TrajectoryError(ValueError):
    """Malformed or inconsistent gait trajectory data."""


class SynthesisError(TrajectoryError):
    """Gait synthesis parameters are infeasible."""


class ConfigError(ValueError):
    """Bad configuration file or scenario definition."""


class SimulationError(RuntimeError):
    """Failure while advancing a simulation."""


class UnsupportedPhaseError(SimulationError):
    """Contact pattern outside the supported running phases (e.g. double stance)."""
