"""Hybrid prescribed/free dynamics: GRF prediction, human inverse dynamics,
exoskeleton forward dynamics, and the per-step simulation loop.

Step ordering (one fixed time step):

1. sample the trajectory (human coordinates, velocities, accelerations,
   contact flags);
2. evaluate strap forces from the current relative state;
3. predict the ground reaction force from whole-system COM kinematics, with
   exoskeleton accelerations lagged one step to break the algebraic loop;
4. run human inverse dynamics without straps (the demand the springs would
   have to supply, used by the assistance controller);
5. run the controller for the actuation forces;
6. run human inverse dynamics with straps (the muscle demand torques);
7. solve exoskeleton forward dynamics and integrate it with semi-implicit
   Euler;
8. solve the muscle redundancy problem and the knee axial reactions;
9. emit an immutable frame.

GRF prediction follows the equivalent-force method: during single stance the
ground must supply F = sum_i m_i (a_i - g) over every segment (human and
exoskeleton), the center of pressure comes from the horizontal moment
balance on the ground plane, and the horizontal force is clamped to a
friction cone.  Flight produces zero force; double stance is out of scope.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .control import mac_step, mic_step, passive_controller
from .errors import ConfigError, SimulationError, UnsupportedPhaseError
from .kinematics import GRAVITY
from .model import HUMAN_DOF_NAMES, ModelAssembly, full_coordinates
from .muscle import default_muscle_set, knee_axial_reaction, solve_muscle_forces
from .straps import (SpringForceVector, moment_arms_cached,
                     resolve_actuator_bindings, resolve_strap_bindings,
                     strap_forces_cached, strap_pressure)

CONTROLLER_KINDS = ("none", "passive", "mic", "mac")


@dataclass(frozen=True)
class SimulationState:
    """Carried state between steps: time plus the free exoskeleton coordinates."""
    t: float
    q_e: np.ndarray
    qd_e: np.ndarray
    qdd_e: np.ndarray        # previous-step accelerations (GRF lag)


@dataclass(frozen=True)
class GrfResult:
    """Predicted ground reaction: force, center of pressure, diagnostics."""
    force: np.ndarray                 # world frame, N
    cop: np.ndarray | None            # on the ground plane, None in flight
    residual_moment: float            # free vertical moment, N*m
    stance_foot: str | None           # "l" | "r" | None
    friction_clamp: float = 0.0       # clamped horizontal magnitude, N


@dataclass(frozen=True)
class HumanTorques:
    """Inverse-dynamics torques: full vector plus the 8 hip/knee components."""
    tau_full: np.ndarray              # 16: root wrench + 5 per leg
    tau_lower: np.ndarray             # 8: L hip(3)+knee, R hip(3)+knee
    knee_force_l: np.ndarray          # intersegmental knee force on the tibia
    knee_force_r: np.ndarray


@dataclass(frozen=True)
class SimulationFrame:
    """Per-step record of every published quantity."""
    t: float
    gait_pct: float
    grf: GrfResult
    tau_full: np.ndarray
    tau_lower: np.ndarray
    tau_req_lower: np.ndarray        # demand without straps (assistance target)
    F_S: np.ndarray
    strap_disp: np.ndarray
    F_A: np.ndarray
    objective: float | None
    desired_F_S: np.ndarray | None
    bound_active: np.ndarray
    activations: np.ndarray
    muscle_forces: np.ndarray
    residual: np.ndarray
    knee_reaction_l: float
    knee_reaction_r: float
    strap_pressures: np.ndarray
    q_e: np.ndarray
    qd_e: np.ndarray


# ----------------------------------------------------------------------
# GRF prediction

@dataclass(frozen=True)
class SystemKinematics:
    """COM kinematics of every segment plus the rotational terms needed for
    the ground-reaction moment balance."""
    com: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]
    rotational: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]  # R, w, dw
    foot_points: dict[str, np.ndarray]       # world contact reference per foot


def system_kinematics(assembly: ModelAssembly, q, qd, qdd,
                      include_exo: bool = True) -> SystemKinematics:
    """Evaluate the per-segment kinematics bundle used by predict_grf."""
    st = assembly.tree.fk(q, qd, qdd)
    return _system_kinematics_cached(assembly, st, include_exo)


def _system_kinematics_cached(assembly, st, include_exo=True) -> SystemKinematics:
    com = {}
    rot = {}
    sel = list(assembly.human_bodies) + (list(assembly.exo_bodies) if include_exo else [])
    for bi in sel:
        b = assembly.tree.bodies[bi]
        com[b.name] = (st.com_p[bi], st.com_v[bi], st.com_a[bi])
        rot[b.name] = (st.R[b.frame], st.w[b.frame], st.dw[b.frame])
    feet = {}
    offset = np.asarray(assembly.config.foot_contact_offset, float)
    for side in ("l", "r"):
        bi = assembly.tree.body_index(f"foot_{side}")
        local = offset if side == "l" else offset * np.array([1.0, 1.0, -1.0])
        feet[side] = assembly.tree.point_world(st, bi, local)
    return SystemKinematics(com, rot, feet)


def predict_grf(assembly: ModelAssembly, kin: SystemKinematics, contact_flags,
                mu: float = 0.8, cop_window=(0.15, 0.05)) -> GrfResult:
    """Equivalent-force GRF for the running single-stance phase.

    Raises :class:`UnsupportedPhaseError` on double stance (walking is out of
    scope).  Flight returns zero force.  The horizontal component is clamped
    to the friction cone |F_h| <= mu * F_y and the CoP to a window around the
    stance-foot contact point.
    """
    contact_l, contact_r = contact_flags
    if contact_l and contact_r:
        raise UnsupportedPhaseError(
            "two stance feet: double-stance GRF distribution is unsupported")
    if not (contact_l or contact_r):
        return GrfResult(np.zeros(3), None, 0.0, None)
    foot = "l" if contact_l else "r"

    F = np.zeros(3)
    M_O = np.zeros(3)
    for name, (p, v, a) in kin.com.items():
        seg = assembly.segment(name)
        f_i = seg.mass * (a - GRAVITY)
        F += f_i
        M_O += np.cross(p, f_i)
        R, w, dw = kin.rotational[name]
        Iw = R @ (np.asarray(seg.inertia_diag)[:, None] * R.T)
        M_O += Iw @ dw + np.cross(w, Iw @ w)

    clamp = 0.0
    if F[1] < 0.0:
        clamp += np.hypot(F[0], F[2]) + abs(F[1])
        F = np.zeros(3)
    horizontal = np.hypot(F[0], F[2])
    if horizontal > mu * F[1]:
        scale = (mu * F[1]) / horizontal if horizontal > 0 else 0.0
        clamp += horizontal - mu * F[1]
        F = np.array([F[0] * scale, F[1], F[2] * scale])

    foot_pt = kin.foot_points[foot]
    if F[1] > 1e-9:
        cop = np.array([M_O[2] / F[1], 0.0, -M_O[0] / F[1]])
    else:
        cop = np.array([foot_pt[0], 0.0, foot_pt[2]])
    cop[0] = np.clip(cop[0], foot_pt[0] - cop_window[0], foot_pt[0] + cop_window[0])
    cop[2] = np.clip(cop[2], foot_pt[2] - cop_window[1], foot_pt[2] + cop_window[1])
    # (r x F)_y = r_z F_x - r_x F_z
    residual = M_O[1] - (cop[2] * F[0] - cop[0] * F[2])
    return GrfResult(F, cop, float(residual), foot, float(clamp))


# ----------------------------------------------------------------------
# inverse / forward dynamics

def _strap_human_loads(tree, st, bindings, F_S):
    loads = []
    for i, b in enumerate(bindings):
        body_h = tree.bodies[b.human_body]
        R_h = st.R[body_h.frame]
        p_h = st.p[body_h.frame] + R_h @ b.human_local
        loads.append((b.human_body, p_h, R_h @ F_S[3 * i:3 * i + 3]))
    return loads


def _grf_load(assembly, grf: GrfResult):
    if grf.stance_foot is None:
        return []
    bi = assembly.tree.body_index(f"foot_{grf.stance_foot}")
    return [(bi, grf.cop, grf.force)]


def _human_id_cached(assembly, st, ext_forces) -> HumanTorques:
    tree = assembly.tree
    tau, joint_force = tree.rnea(st, ext_forces, bodies=assembly.human_bodies)
    tau_h = tau[assembly.human_dofs]
    tau_lower = tau[assembly.lower_dofs]
    kf_l = joint_force[tree._frame_by_name["knee_angle_l"]]
    kf_r = joint_force[tree._frame_by_name["knee_angle_r"]]
    return HumanTorques(tau_h, tau_lower, kf_l, kf_r)


def inverse_dynamics_human(assembly: ModelAssembly, q_h, qd_h, qdd_h,
                           grf: GrfResult, F_S=None,
                           include_straps: bool = True) -> HumanTorques:
    """Recursive Newton-Euler over the human tree under GRF and strap loads.

    The GRF acts at the CoP on the stance foot; strap forces act at the body
    points (omitted when ``include_straps`` is false or ``F_S`` is None).
    Exoskeleton joint reactions through the tie do not load the hip/knee
    rows; they are absorbed by the root-wrench residual.
    """
    q = full_coordinates(assembly, q_h)
    qd = full_coordinates(assembly, qd_h)
    qdd = full_coordinates(assembly, qdd_h)
    st = assembly.tree.fk(q, qd, qdd)
    ext = _grf_load(assembly, grf)
    if include_straps and F_S is not None:
        bindings = resolve_strap_bindings(assembly)
        ext = ext + _strap_human_loads(assembly.tree, st, bindings, np.asarray(F_S, float))
    return _human_id_cached(assembly, st, ext)


def forward_dynamics_exo(assembly: ModelAssembly, q_e, qd_e, F_A, F_S,
                         human_state=None) -> np.ndarray:
    """Exoskeleton joint accelerations under actuation and spring torques.

    Solves M(q_e) qdd_e = M_A F_A + M_SE F_S - bias where the bias holds
    gravity, velocity products and the motion of the load support pinned to
    the (moving) prescribed pelvis.  ``human_state`` is an optional
    (q_h, qd_h, qdd_h) triple; default is a static standing base.
    """
    F_A = np.asarray(F_A, float)
    limits = np.array([a.force_limit for a in assembly.actuators])
    if np.any(np.abs(F_A) > limits * (1 + 1e-9)):
        raise ValueError("actuation forces exceed the actuator force limits")
    if human_state is None:
        q_h, qd_h, qdd_h = np.zeros(16), np.zeros(16), np.zeros(16)
    else:
        q_h, qd_h, qdd_h = human_state
    q = full_coordinates(assembly, q_h, q_e)
    qd = full_coordinates(assembly, qd_h, qd_e)
    qdd = full_coordinates(assembly, qdd_h)     # exo block zero: bias pass
    st = assembly.tree.fk(q, qd, qdd)
    tau_bias = assembly.tree.rnea(st, bodies=assembly.exo_bodies)[0][assembly.exo_dofs]
    arms = moment_arms_cached(assembly, st, resolve_strap_bindings(assembly),
                              resolve_actuator_bindings(assembly))
    applied = arms.M_A @ F_A + arms.M_SE @ np.asarray(F_S, float)
    M = assembly.tree.mass_matrix(st, assembly.exo_bodies, assembly.exo_dofs)
    try:
        return np.linalg.solve(M, applied - tau_bias)
    except np.linalg.LinAlgError as e:
        raise SimulationError(f"singular exoskeleton mass matrix: {e}") from None


def exo_mechanical_energy(assembly: ModelAssembly, q_h, q_e, qd_e,
                          qd_h=None) -> float:
    """Kinetic plus gravitational potential energy of the exoskeleton parts."""
    q = full_coordinates(assembly, q_h, q_e)
    qd = full_coordinates(assembly, np.zeros(16) if qd_h is None else qd_h, qd_e)
    st = assembly.tree.fk(q, qd)
    E = 0.0
    for bi in assembly.exo_bodies:
        b = assembly.tree.bodies[bi]
        R = st.R[b.frame]
        Iw = R @ (np.asarray(b.inertia)[:, None] * R.T)
        w = st.w[b.frame]
        E += 0.5 * b.mass * st.com_v[bi] @ st.com_v[bi] + 0.5 * w @ (Iw @ w)
        E += b.mass * 9.81 * st.com_p[bi][1]
    return float(E)


# ----------------------------------------------------------------------
# simulation loop

class Simulation:
    """One scenario: assembly + trajectory + controller, stepped at fixed dt.

    Distinct instances share no mutable state and can run concurrently; a
    single instance advances strictly sequentially.
    """

    def __init__(self, assembly: ModelAssembly, trajectory, controller: str = "passive",
                 muscles=None, dt: float = 1e-3, mu: float = 0.8,
                 include_exo_in_grf: bool | None = None,
                 mac_demand_includes_straps: bool = False,
                 cop_window=(0.15, 0.05), muscle_weight: float = 100.0):
        if controller not in CONTROLLER_KINDS:
            raise ConfigError(f"unknown controller '{controller}', "
                              f"expected one of {CONTROLLER_KINDS}")
        if not 0.0 < dt <= 5e-3:
            raise ConfigError(f"dt must lie in (0, 5e-3], got {dt}")
        if tuple(trajectory.coord_names) != HUMAN_DOF_NAMES:
            raise ConfigError(
                "trajectory coordinate names do not match the model DOF layout")
        self.assembly = assembly
        self.trajectory = trajectory
        self.controller = controller
        self.muscles = default_muscle_set() if muscles is None else tuple(muscles)
        self.dt = float(dt)
        self.mu = float(mu)
        self.cop_window = tuple(cop_window)
        self.muscle_weight = float(muscle_weight)
        self.has_exo = controller != "none"
        self.include_exo_in_grf = (self.has_exo if include_exo_in_grf is None
                                   else bool(include_exo_in_grf))
        self.mac_demand_includes_straps = bool(mac_demand_includes_straps)
        self._bindings = resolve_strap_bindings(assembly)
        self._act_bindings = resolve_actuator_bindings(assembly)
        self._limits = np.array([a.force_limit for a in assembly.actuators])
        self._warned_limits: set[str] = set()

    def initial_state(self, t: float = 0.0) -> SimulationState:
        from .model import exo_pose_matching_human
        q_h = self.trajectory.sample(t)[0]
        q_e = exo_pose_matching_human(self.assembly, q_h) if self.has_exo else np.zeros(6)
        return SimulationState(t, q_e, np.zeros(6), np.zeros(6))

    def _check_limits(self, q_e):
        for i, name in enumerate(self.assembly.dof_names[16:]):
            lo, hi = self.assembly.coordinate_limits[name]
            if (q_e[i] < lo or q_e[i] > hi) and name not in self._warned_limits:
                self._warned_limits.add(name)
                warnings.warn(f"exoskeleton coordinate {name} exceeded its limits "
                              f"[{lo}, {hi}]: {q_e[i]:.3f} rad", stacklevel=3)

    def step(self, state: SimulationState, dt: float | None = None):
        """Advance one step; returns (frame, next_state)."""
        dt = self.dt if dt is None else float(dt)
        if not dt > 0:
            raise SimulationError("dt must be positive")
        asm = self.assembly
        tree = asm.tree

        # (1) prescribed motion
        q_h, qd_h, qdd_h, contacts = self.trajectory.sample(state.t)
        q = full_coordinates(asm, q_h, state.q_e if self.has_exo else None)
        qd = full_coordinates(asm, qd_h, state.qd_e if self.has_exo else None)
        qdd = full_coordinates(asm, qdd_h, state.qdd_e if self.has_exo else None)
        st = tree.fk(q, qd, qdd)

        # (2) strap forces from the current relative state
        if self.has_exo:
            sv = strap_forces_cached(tree, st, self._bindings)
            human_loads = _strap_human_loads(tree, st, self._bindings, sv.F_S)
        else:
            sv = SpringForceVector(np.zeros(12), np.zeros((4, 3)), np.zeros((4, 3)),
                                   tuple(s.name for s in asm.straps))
            human_loads = []

        # (3) GRF with exoskeleton accelerations lagged one step
        kin = _system_kinematics_cached(asm, st, include_exo=self.include_exo_in_grf)
        grf = predict_grf(asm, kin, contacts, self.mu, self.cop_window)
        grf_load = _grf_load(asm, grf)

        # (4) demand torques without straps (what the springs should supply)
        id_nostrap = _human_id_cached(asm, st, grf_load)

        # (5) controller
        if self.controller in ("mic", "mac"):
            arms = moment_arms_cached(asm, st, self._bindings, self._act_bindings,
                                      stamp=q)
            if self.controller == "mic":
                out = mic_step(arms.M_A, arms.M_SE, sv.F_S, self._limits)
            else:
                id_with = _human_id_cached(asm, st, grf_load + human_loads)
                tau_req = (id_with.tau_lower if self.mac_demand_includes_straps
                           else id_nostrap.tau_lower)
                out = mac_step(arms.M_SH, arms.M_SE, arms.M_A, tau_req, self._limits)
        else:
            out = passive_controller()

        # (6) muscle demand: inverse dynamics with strap loads
        torques = _human_id_cached(asm, st, grf_load + human_loads)

        # (7) exoskeleton forward dynamics + semi-implicit Euler
        if self.has_exo:
            if self.controller in ("mic", "mac"):
                applied = arms.M_A @ out.F_A + arms.M_SE @ sv.F_S
            else:
                arms0 = moment_arms_cached(asm, st, self._bindings, self._act_bindings)
                applied = arms0.M_SE @ sv.F_S
            tau_rows = tree.rnea(st, bodies=asm.exo_bodies)[0][asm.exo_dofs]
            M = tree.mass_matrix(st, asm.exo_bodies, asm.exo_dofs)
            try:
                qdd_e = state.qdd_e + np.linalg.solve(M, applied - tau_rows)
            except np.linalg.LinAlgError as e:
                raise SimulationError(f"singular exoskeleton mass matrix: {e}") from None
            qd_e = state.qd_e + qdd_e * dt
            q_e = state.q_e + qd_e * dt
            self._check_limits(q_e)
        else:
            qdd_e = np.zeros(6)
            qd_e = state.qd_e
            q_e = state.q_e

        # (8) muscle redundancy and knee reactions
        msol = solve_muscle_forces(torques.tau_lower, self.muscles, q_h,
                                   w=self.muscle_weight)
        knee_l = knee_axial_reaction(asm, q_h, torques.knee_force_l,
                                     msol.forces, self.muscles, "l")
        knee_r = knee_axial_reaction(asm, q_h, torques.knee_force_r,
                                     msol.forces, self.muscles, "r")

        frame = SimulationFrame(
            t=state.t,
            gait_pct=100.0 * self.trajectory.gait_fraction(state.t),
            grf=grf,
            tau_full=torques.tau_full,
            tau_lower=torques.tau_lower,
            tau_req_lower=id_nostrap.tau_lower,
            F_S=sv.F_S,
            strap_disp=sv.displacements,
            F_A=out.F_A,
            objective=out.objective_value,
            desired_F_S=out.desired_F_S,
            bound_active=out.bound_active,
            activations=msol.activations,
            muscle_forces=msol.forces,
            residual=msol.residual,
            knee_reaction_l=knee_l,
            knee_reaction_r=knee_r,
            strap_pressures=strap_pressure(sv.F_S, asm.straps),
            q_e=q_e.copy(),
            qd_e=qd_e.copy(),
        )
        return frame, SimulationState(state.t + dt, q_e, qd_e, qdd_e)


def step(sim: Simulation, state: SimulationState, dt: float):
    """Module-level convenience wrapper for :meth:`Simulation.step`."""
    return sim.step(state, dt)


def run_cycle(sim: Simulation, cycles: int = 2, discard: int = 1):
    """Simulate whole gait cycles and summarize the kept ones.

    The step size is snapped to an integer number of steps per cycle.  The
    first ``discard`` cycles are dropped as the exoskeleton start-up
    transient.  Returns (frames, summary dict).
    """
    if cycles < 1:
        raise ConfigError("cycles must be >= 1")
    if not 0 <= discard < cycles:
        discard = min(max(discard, 0), cycles - 1)
    T = sim.trajectory.cycle_duration
    n = max(1, round(T / sim.dt))
    dt = T / n
    state = sim.initial_state()
    frames: list[SimulationFrame] = []
    for k in range(cycles * n):
        frame, state = sim.step(state, dt)
        if k >= discard * n:
            frames.append(frame)
    summary = summarize(sim, frames, dt)
    return frames, summary


def summarize(sim: Simulation, frames, dt: float) -> dict:
    """Peak/RMS summary of a frame series (one or more whole cycles)."""
    asm = sim.assembly
    tau = np.array([f.tau_lower for f in frames])          # (n, 8)
    grf = np.array([f.grf.force for f in frames])          # (n, 3)
    F_S = np.array([f.F_S for f in frames])                # (n, 12)
    act = np.array([f.activations for f in frames])
    F_A = np.array([f.F_A for f in frames])
    press = np.array([f.strap_pressures for f in frames])
    knee_l = np.array([f.knee_reaction_l for f in frames])
    knee_r = np.array([f.knee_reaction_r for f in frames])

    hip_flex = tau[:, [0, 4]]
    hip_add = tau[:, [1, 5]]
    hip_rot = tau[:, [2, 6]]
    knee = tau[:, [3, 7]]

    weight = (asm.total_mass if sim.include_exo_in_grf else asm.subject_mass) * 9.81
    impulse = (grf.sum(axis=0) + np.array([0.0, -weight, 0.0]) * len(frames)) * dt

    summary = {
        "controller": sim.controller,
        "dt": dt,
        "n_frames": len(frames),
        "cycle_duration": sim.trajectory.cycle_duration,
        "system_weight": weight,
        "peak_grf_vertical": float(grf[:, 1].max()),
        "peak_grf_fore_aft": float(np.abs(grf[:, 0]).max()),
        "peak_grf_lateral": float(np.abs(grf[:, 2]).max()),
        "mean_grf_vertical": float(grf[:, 1].mean()),
        "peak_hip_flexion_torque": float(hip_flex.max()),
        "peak_hip_extension_torque": float((-hip_flex).max()),
        "peak_hip_abduction_torque": float((-hip_add).max()),
        "peak_hip_rotation_torque": float(np.abs(hip_rot).max()),
        "peak_knee_extension_torque": float(knee.max()),
        "rms_strap_force_all": float(np.sqrt((F_S ** 2).mean())),
        "peak_strap_force": float(np.abs(F_S).max()),
        "peak_strap_pressure": float(press.max()),
        "peak_actuation_force": float(np.abs(F_A).max()),
        "peak_activation": float(act.max()),
        "peak_knee_compression": float(max((-knee_l).max(), (-knee_r).max())),
        "impulse_residual_x": float(impulse[0]),
        "impulse_residual_y": float(impulse[1]),
        "impulse_residual_z": float(impulse[2]),
    }
    for i, s in enumerate(asm.straps):
        for j, d in enumerate("xyz"):
            summary[f"rms_strap_{s.name}_{d}"] = float(
                np.sqrt((F_S[:, 3 * i + j] ** 2).mean()))
    names = [m.name for m in sim.muscles]
    for j, nm in enumerate(names):
        summary[f"peak_activation_{nm}"] = float(act[:, j].max())
    return summary
