"""Static muscle-force optimization and the knee axial joint reaction.

Muscle forces over the 8 lower-extremity DOFs (3 per hip + 1 per knee) are
found by minimizing

    sum_i (f_i / f_i_max)^2 + w * C^T C,      C = tau_demand - R f

subject to 0 <= f_i <= f_i_max, where R is the muscle moment-arm matrix and
C the residual torque.  With p = 2 this is an exact convex box-constrained
least-squares problem and shares the active-set solver with the controllers.

The default muscle set covers six hip/knee muscles per leg with constant
moment arms and maximum forces shipped as order-of-magnitude configurable
defaults (they are model parameters, not subject measurements).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import bounded_least_squares
from .model import LOWER_DOF_NAMES

N_LOWER = len(LOWER_DOF_NAMES)


@dataclass(frozen=True)
class MuscleActuator:
    """One lumped muscle: capacity, spanned DOFs and signed moment arms.

    ``arms`` maps lower-extremity DOF names to constant signed moment arms
    (m); positive arm produces positive torque on that coordinate.  An
    optional ``arm_fn(q8) -> dict`` overrides them as a function of the 8
    lower-extremity angles, and ``length_fn(q8) -> m`` exposes the
    musculotendon length consistent with the arms (tendon excursion:
    arm = -dL/dq).  ``axial_angle`` is the angle between the muscle's line
    of action and the tibia long axis for knee-crossing muscles, used by the
    joint-reaction estimate.
    """
    name: str
    side: str                       # "l" | "r"
    f_max: float
    arms: dict[str, float]
    arm_fn: object = None
    length_fn: object = None
    crosses_knee: bool = False
    axial_angle: float = 0.0
    rest_length: float = 0.4

    def __post_init__(self):
        if not self.f_max > 0:
            raise ValueError(f"muscle {self.name}: f_max must be positive")
        if not self.arms:
            raise ValueError(f"muscle {self.name}: must span at least one DOF")
        for dof in self.arms:
            if dof not in LOWER_DOF_NAMES:
                raise ValueError(f"muscle {self.name}: unknown DOF '{dof}'")

    def moment_arms(self, q8) -> dict[str, float]:
        if self.arm_fn is not None:
            return self.arm_fn(np.asarray(q8, float))
        return self.arms

    def length(self, q8) -> float:
        if self.length_fn is not None:
            return float(self.length_fn(np.asarray(q8, float)))
        q8 = np.asarray(q8, float)
        L = self.rest_length
        for dof, r in self.arms.items():
            L -= r * q8[LOWER_DOF_NAMES.index(dof)]
        return float(L)


@dataclass(frozen=True)
class MuscleSolution:
    """Optimized forces, activations, residual torques and objective value."""
    forces: np.ndarray          # per muscle, N
    activations: np.ndarray     # f / f_max in [0, 1]
    residual: np.ndarray        # 8-vector C, N*m
    objective: float
    muscle_names: tuple[str, ...]


_DEFAULT_MUSCLES = (
    # name, f_max, arms (per leg, same signed values both sides), crosses_knee, axial_angle
    ("glut_max", 3000.0, {"hip_flexion": -0.062, "hip_rotation": -0.022}, False, 0.0),
    ("bifem_lh", 2200.0, {"hip_flexion": -0.055, "knee_angle": -0.032}, True, 0.25),
    ("bifem_sh", 1200.0, {"knee_angle": -0.035}, True, 0.20),
    ("rect_fem", 2400.0, {"hip_flexion": 0.042, "knee_angle": 0.044}, True, 0.15),
    ("vas_lat", 5000.0, {"knee_angle": 0.044}, True, 0.12),
    ("vas_med", 3500.0, {"knee_angle": 0.044}, True, 0.12),
)


def default_muscle_set(overrides: dict | None = None) -> tuple[MuscleActuator, ...]:
    """Six hip/knee muscles per leg (the comparison set), both sides.

    ``overrides`` maps muscle base name to a dict with optional ``f_max`` /
    ``arms`` / ``axial_angle`` replacements applied to both sides.
    """
    overrides = overrides or {}
    out = []
    for side in ("l", "r"):
        for base, f_max, arms, crosses, angle in _DEFAULT_MUSCLES:
            ov = overrides.get(base, {})
            f_max_eff = float(ov.get("f_max", f_max))
            arms_eff = dict(ov.get("arms", arms))
            angle_eff = float(ov.get("axial_angle", angle))
            out.append(MuscleActuator(
                name=f"{base}_{side}", side=side, f_max=f_max_eff,
                arms={f"{dof}_{side}": r for dof, r in arms_eff.items()},
                crosses_knee=crosses, axial_angle=angle_eff))
    return tuple(out)


# ----------------------------------------------------------------------
# solver

def moment_arm_matrix(muscles, q_h) -> np.ndarray:
    """8 x n matrix of signed muscle moment arms at the given posture.

    Column i holds muscle i's arms over the 8 lower-extremity DOFs (zeros
    off its spanned set).  ``q_h`` may be the full 16-coordinate human vector
    or just the 8 lower-extremity angles.
    """
    q_h = np.asarray(q_h, float)
    if q_h.size == 16:
        q8 = q_h[[6, 7, 8, 9, 11, 12, 13, 14]]
    elif q_h.size == N_LOWER:
        q8 = q_h
    else:
        raise ValueError(f"expected 8 or 16 coordinates, got {q_h.size}")
    R = np.zeros((N_LOWER, len(muscles)))
    for i, m in enumerate(muscles):
        for dof, r in m.moment_arms(q8).items():
            R[LOWER_DOF_NAMES.index(dof), i] = r
    return R


def solve_muscle_forces(tau_demand, muscles, q_h, p: int = 2,
                        w: float = 100.0) -> MuscleSolution:
    """Resolve muscle redundancy for an 8-vector of demand torques.

    Exact convex QP via box-constrained least squares on the stacked system
    [diag(1/f_max); sqrt(w) R] f ~ [0; sqrt(w) tau].  Always feasible
    (f = 0 leaves C = tau_demand).
    """
    if p != 2:
        raise ValueError("only the quadratic effort exponent p = 2 is supported")
    if not w > 0:
        raise ValueError("residual weight w must be positive")
    tau = np.asarray(tau_demand, float)
    if tau.shape != (N_LOWER,):
        raise ValueError(f"demand torque must have length {N_LOWER}")
    R = moment_arm_matrix(muscles, q_h)
    f_max = np.array([m.f_max for m in muscles])
    n = f_max.size
    sw = np.sqrt(w)
    A = np.vstack([np.diag(1.0 / f_max), sw * R])
    b = np.concatenate([np.zeros(n), sw * tau])
    f = bounded_least_squares(A, b, np.zeros(n), f_max)
    f = np.clip(f, 0.0, f_max)
    C = tau - R @ f
    a = f / f_max
    objective = float(a @ a + w * (C @ C))
    return MuscleSolution(f, a, C, objective, tuple(m.name for m in muscles))


# ----------------------------------------------------------------------
# joint reaction

def knee_axial_reaction(assembly, q_h, knee_force_world, muscle_forces,
                        muscles, side: str = "l") -> float:
    """Axial knee joint reaction along the tibia axis (negative = compression).

    Combines the intersegmental knee force from inverse dynamics with the
    axial pull of every muscle crossing the knee on that side; each muscle
    force f at angle theta to the tibia axis adds -f cos(theta).
    """
    from .model import full_coordinates
    q = full_coordinates(assembly, np.asarray(q_h, float))
    st = assembly.tree.fk(q)
    tibia = assembly.tree.body(f"tibia_{side}")
    axis_up = st.R[tibia.frame][:, 1]        # proximal-pointing tibia axis
    reaction = float(np.asarray(knee_force_world, float) @ axis_up)
    for f, m in zip(muscle_forces, muscles):
        if m.crosses_knee and m.side == side:
            reaction -= float(f) * np.cos(m.axial_angle)
    return reaction
