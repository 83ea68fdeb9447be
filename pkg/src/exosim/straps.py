"""Tri-directional strap force elements and generalized moment-arm matrices.

Each strap pairs a point on an exoskeleton part with a point on the adjacent
human segment and acts as three independent damped linear springs along the
x/y/z axes of the *human* segment frame, so the "fore-aft" direction follows
the limb through flexion.  Per direction d:

    f_d = k_d (d - d_0) + c_d * d_dot

The 12-vector of spring forces F_S is ordered femur_l, femur_r, tibia_l,
tibia_r, each contributing (x, y, z).  Forces are applied equal-and-opposite:
+R_h f on the human point, -R_h f on the exoskeleton point, where R_h is the
human segment rotation.

Three configuration-dependent moment-arm matrices are assembled from point
Jacobians: actuation-to-exo-torque (6x6), spring-to-exo-torque (6x12) and
spring-to-human-torque over the 8 hip/knee DOFs (8x12).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SimulationError

STRAP_DIRECTIONS = ("x", "y", "z")


@dataclass(frozen=True)
class StrapElement:
    """One strap: paired points, directional stiffness/damping, rest offset."""
    name: str
    exo_point: tuple[str, tuple[float, float, float]]
    body_point: tuple[str, tuple[float, float, float]]
    stiffness: tuple[float, float, float] = (160000.0, 1600.0, 1600.0)
    damping: tuple[float, float, float] = (400.0, 40.0, 40.0)
    rest_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    contact_area: float = 0.02
    # optional 6-direction extension: stiffness for negative displacements,
    # defaults to the symmetric values
    stiffness_negative: tuple[float, float, float] | None = None

    def __post_init__(self):
        if min(self.stiffness) < 0 or min(self.damping) < 0:
            raise ValueError(f"strap {self.name}: stiffness/damping must be >= 0")


@dataclass(frozen=True)
class SpringForceVector:
    """Spring forces of all four straps plus per-strap displacement diagnostics."""
    F_S: np.ndarray                       # shape (12,)
    displacements: np.ndarray             # shape (4, 3), d - d_0 per strap
    velocities: np.ndarray                # shape (4, 3)
    strap_names: tuple[str, ...]

    def per_strap(self) -> dict[str, np.ndarray]:
        return {n: self.F_S[3 * i:3 * i + 3] for i, n in enumerate(self.strap_names)}


@dataclass(frozen=True)
class MomentArmSet:
    """Generalized moment-arm matrices evaluated at one configuration."""
    M_A: np.ndarray        # 6 x 6, actuation forces -> exo joint torques
    M_SE: np.ndarray       # 6 x 12, spring forces -> exo joint torques
    M_SH: np.ndarray       # 8 x 12, spring forces -> human hip/knee torques
    evaluated_at: np.ndarray = field(repr=False)  # stacked (q_h, q_e) stamp


@dataclass(frozen=True)
class _StrapBinding:
    exo_body: int
    exo_local: np.ndarray
    human_body: int
    human_local: np.ndarray
    k: np.ndarray
    k_neg: np.ndarray
    c: np.ndarray
    d0: np.ndarray
    name: str


def resolve_strap_bindings(assembly) -> tuple[_StrapBinding, ...]:
    """Bind strap endpoint descriptions to tree body indices (done once)."""
    out = []
    for s in assembly.straps:
        k = np.asarray(s.stiffness, float)
        out.append(_StrapBinding(
            exo_body=assembly.tree.body_index(s.exo_point[0]),
            exo_local=np.asarray(s.exo_point[1], float),
            human_body=assembly.tree.body_index(s.body_point[0]),
            human_local=np.asarray(s.body_point[1], float),
            k=k,
            k_neg=k if s.stiffness_negative is None
            else np.asarray(s.stiffness_negative, float),
            c=np.asarray(s.damping, float),
            d0=np.asarray(s.rest_offset, float),
            name=s.name))
    return tuple(out)


def calibrate_rest_offsets(assembly):
    """Return a copy of the assembly with rest offsets equal to the
    assembled-pose (all coordinates zero) point separations, so the reference
    configuration is force-free."""
    st = assembly.tree.fk(np.zeros(assembly.ndof))
    new_straps = []
    for s in assembly.straps:
        eb = assembly.tree.body_index(s.exo_point[0])
        hb = assembly.tree.body_index(s.body_point[0])
        p_e = assembly.tree.point_world(st, eb, s.exo_point[1])
        p_h = assembly.tree.point_world(st, hb, s.body_point[1])
        R_h = st.R[assembly.tree.bodies[hb].frame]
        d0 = R_h.T @ (p_e - p_h)
        new_straps.append(replace(s, rest_offset=tuple(d0)))
    return replace(assembly, straps=tuple(new_straps))


# ----------------------------------------------------------------------
# force evaluation

def _strap_state(tree, st, b: _StrapBinding):
    """Displacement, velocity and local force for one strap at a tree state."""
    body_e = tree.bodies[b.exo_body]
    body_h = tree.bodies[b.human_body]
    R_h = st.R[body_h.frame]
    r_e = st.R[body_e.frame] @ b.exo_local
    r_h = R_h @ b.human_local
    p_e = st.p[body_e.frame] + r_e
    p_h = st.p[body_h.frame] + r_h
    v_e = st.v[body_e.frame] + np.cross(st.w[body_e.frame], r_e)
    v_h = st.v[body_h.frame] + np.cross(st.w[body_h.frame], r_h)
    dp = p_e - p_h
    d = R_h.T @ dp
    # d/dt [R_h^T dp] = R_h^T (dp_dot - w_h x dp)
    ddot = R_h.T @ (v_e - v_h - np.cross(st.w[body_h.frame], dp))
    stretch = d - b.d0
    k = np.where(stretch >= 0.0, b.k, b.k_neg)
    f_local = k * stretch + b.c * ddot
    return f_local, stretch, ddot, p_e, p_h, R_h


def strap_forces_cached(tree, st, bindings) -> SpringForceVector:
    """Spring force vector from an existing forward-kinematics state."""
    n = len(bindings)
    F = np.empty(3 * n)
    disp = np.empty((n, 3))
    vel = np.empty((n, 3))
    for i, b in enumerate(bindings):
        f_local, stretch, ddot, _, _, _ = _strap_state(tree, st, b)
        F[3 * i:3 * i + 3] = f_local
        disp[i] = stretch
        vel[i] = ddot
    return SpringForceVector(F, disp, vel, tuple(b.name for b in bindings))


def strap_forces(assembly, q_h, qd_h, q_e, qd_e) -> SpringForceVector:
    """Evaluate all four straps at the given human/exoskeleton state."""
    from .model import full_coordinates
    q = full_coordinates(assembly, q_h, q_e)
    qd = full_coordinates(assembly, qd_h, qd_e)
    st = assembly.tree.fk(q, qd)
    return strap_forces_cached(assembly.tree, st, resolve_strap_bindings(assembly))


def strap_world_forces(tree, st, bindings, F_S):
    """World-frame force pairs for given local force components.

    Returns a list of (human_body, p_h, f_world) and (exo_body, p_e, -f_world)
    tuples, suitable as external loads for inverse/forward dynamics.
    """
    human_loads = []
    exo_loads = []
    for i, b in enumerate(bindings):
        body_e = tree.bodies[b.exo_body]
        body_h = tree.bodies[b.human_body]
        R_h = st.R[body_h.frame]
        p_e = st.p[body_e.frame] + st.R[body_e.frame] @ b.exo_local
        p_h = st.p[body_h.frame] + R_h @ b.human_local
        f_world = R_h @ F_S[3 * i:3 * i + 3]
        human_loads.append((b.human_body, p_h, f_world))
        exo_loads.append((b.exo_body, p_e, -f_world))
    return human_loads, exo_loads


# ----------------------------------------------------------------------
# moment arms

def resolve_actuator_bindings(assembly):
    """Bind actuator endpoint descriptions to tree body indices."""
    out = []
    for a in assembly.actuators:
        out.append((
            assembly.tree.body_index(a.endpoint_a[0]),
            np.asarray(a.endpoint_a[1], float),
            assembly.tree.body_index(a.endpoint_b[0]),
            np.asarray(a.endpoint_b[1], float),
            a.name,
        ))
    return tuple(out)


def moment_arms_cached(assembly, st, strap_bindings, act_bindings,
                       stamp=None) -> MomentArmSet:
    tree = assembly.tree
    exo_dofs = assembly.exo_dofs
    lower = assembly.lower_dofs

    M_A = np.zeros((6, 6))
    for i, (ba, la, bb, lb, name) in enumerate(act_bindings):
        p_a = tree.point_world(st, ba, la)
        p_b = tree.point_world(st, bb, lb)
        d = p_a - p_b
        L = np.linalg.norm(d)
        if L < 1e-9:
            raise SimulationError(
                f"actuator {name}: endpoints coincide, geometry is degenerate")
        u = d / L
        J_a = tree.point_jacobian(st, ba, la)[:, exo_dofs]
        J_b = tree.point_jacobian(st, bb, lb)[:, exo_dofs]
        M_A[:, i] = (J_b - J_a).T @ u

    M_SE = np.zeros((6, 12))
    M_SH = np.zeros((8, 12))
    for i, b in enumerate(strap_bindings):
        R_h = st.R[tree.bodies[b.human_body].frame]
        J_e = tree.point_jacobian(st, b.exo_body, b.exo_local)[:, exo_dofs]
        J_h = tree.point_jacobian(st, b.human_body, b.human_local)[:, lower]
        M_SE[:, 3 * i:3 * i + 3] = -J_e.T @ R_h
        M_SH[:, 3 * i:3 * i + 3] = J_h.T @ R_h

    return MomentArmSet(M_A=M_A, M_SE=M_SE, M_SH=M_SH,
                        evaluated_at=np.empty(0) if stamp is None else stamp)


def moment_arms(assembly, q_h, q_e) -> MomentArmSet:
    """Evaluate M_A, M_SE and M_SH at a human/exoskeleton configuration."""
    from .model import full_coordinates
    q = full_coordinates(assembly, q_h, q_e)
    st = assembly.tree.fk(q)
    return moment_arms_cached(assembly, st, resolve_strap_bindings(assembly),
                              resolve_actuator_bindings(assembly), stamp=q.copy())


# ----------------------------------------------------------------------
# interface pressure

def strap_pressure(F_S, straps) -> np.ndarray:
    """Per-strap skin pressure estimate: |fore-aft force| / contact area (Pa)."""
    F_S = np.asarray(F_S, float)
    out = np.empty(len(straps))
    for i, s in enumerate(straps):
        if not s.contact_area > 0:
            raise ValueError(f"strap {s.name}: contact area must be positive")
        out[i] = abs(F_S[3 * i]) / s.contact_area
    return out
