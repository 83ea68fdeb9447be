"""Human-in-the-loop co-simulation of a strapped lower-extremity exoskeleton.

A desk-scale numpy/scipy library implementing a hybrid prescribed/free
dynamics pipeline: the human lower body follows a gait trajectory (inverse
dynamics) while the exoskeleton evolves freely (forward dynamics), coupled
through tri-directional strap force elements.  Two optimization-based torque
compensation controllers and a static muscle-force solver quantify the
effect of the device on the wearer's loadings.
"""

from .errors import (ConfigError, ModelError, SimulationError, SynthesisError,
                     TrajectoryError, UnsupportedPhaseError)
from .model import (ActuatorSpec, BodySegment, JointSpec, ModelAssembly,
                    ModelConfig, build_default_assembly, com_kinematics,
                    forward_kinematics, point_jacobian, validate_assembly)
from .motion import GaitTrajectory, load_trajectory, save_trajectory, synthesize_running_gait
from .straps import (MomentArmSet, SpringForceVector, StrapElement,
                     moment_arms, strap_forces, strap_pressure)

__all__ = [
    "ActuatorSpec", "BodySegment", "ConfigError", "GaitTrajectory",
    "JointSpec", "ModelAssembly", "ModelConfig", "ModelError", "MomentArmSet",
    "SimulationError", "SpringForceVector", "StrapElement", "SynthesisError",
    "TrajectoryError", "UnsupportedPhaseError", "build_default_assembly",
    "com_kinematics", "forward_kinematics", "load_trajectory", "moment_arms",
    "point_jacobian", "save_trajectory", "strap_forces", "strap_pressure",
    "synthesize_running_gait", "validate_assembly",
]

__version__ = "0.1.0"
