"""Rigid-body model of the human lower body and the 7-part exoskeleton.

The human side is a prescribed-motion tree: a 6-DOF free root carrying the
pelvis (plus a lumped head-arms-trunk segment), and per leg a 3-DOF spherical
hip, a revolute knee and a revolute ankle.  The exoskeleton side is a free
(forward-dynamics) tree: a load-support frame rigidly tied to the pelvis,
and per side three revolute joints driving the exo-pelvis, exo-femur and
exo-tibia parts.

Axis conventions (world and all segment frames at the reference pose):
x fore-aft (forward +), y vertical (up +), z lateral (left +).  Coordinate
signs: hip flexion +, hip adduction +, hip internal rotation +, knee
extension + (straight leg = 0, flexed < 0), ankle dorsiflexion +.

Both trees live in one :class:`~exosim.kinematics.KinematicTree` so that
coupled quantities (strap geometry, whole-system GRF balance) come from a
single forward pass; the human/exoskeleton split is carried as index sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ModelError
from .kinematics import KinematicTree, TreeState
from .straps import StrapElement

HUMAN_DOF_NAMES = (
    "root_tx", "root_ty", "root_tz", "root_rx", "root_ry", "root_rz",
    "hip_flexion_l", "hip_adduction_l", "hip_rotation_l", "knee_angle_l", "ankle_angle_l",
    "hip_flexion_r", "hip_adduction_r", "hip_rotation_r", "knee_angle_r", "ankle_angle_r",
)
EXO_DOF_NAMES = (
    "exo_pelvis_l", "exo_hip_l", "exo_knee_l",
    "exo_pelvis_r", "exo_hip_r", "exo_knee_r",
)
# lower-extremity DOFs mapped by straps/controllers/muscles, fixed ordering
LOWER_DOF_NAMES = (
    "hip_flexion_l", "hip_adduction_l", "hip_rotation_l", "knee_angle_l",
    "hip_flexion_r", "hip_adduction_r", "hip_rotation_r", "knee_angle_r",
)

N_HUMAN_DOF = len(HUMAN_DOF_NAMES)
N_EXO_DOF = len(EXO_DOF_NAMES)


@dataclass(frozen=True)
class BodySegment:
    """A rigid segment: mass, diagonal inertia about the COM, COM offset."""
    name: str
    mass: float
    inertia_diag: tuple[float, float, float]
    com_offset: tuple[float, float, float]
    length: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ModelError(f"{self.name}: mass must be positive, got {self.mass}")
        ixx, iyy, izz = self.inertia_diag
        if min(ixx, iyy, izz) < 0:
            raise ModelError(f"{self.name}: inertia components must be non-negative")
        for a, bc, lbl in ((ixx, iyy + izz, "Ixx"), (iyy, ixx + izz, "Iyy"),
                           (izz, ixx + iyy, "Izz")):
            if a > bc + 1e-12:
                raise ModelError(
                    f"{self.name}: {lbl} violates the principal-inertia "
                    f"triangle inequality ({a:.4g} > {bc:.4g})")


@dataclass(frozen=True)
class JointSpec:
    """Descriptive record of one mechanical joint between two segments."""
    name: str
    kind: str                 # revolute-1dof | spherical-3dof | free-6dof | fixed
    parent: str
    child: str
    mode: str                 # prescribed-ID | free-FD
    anchor: tuple[float, float, float]
    axis: tuple[float, float, float] | None = None          # revolute only
    coordinate_limits: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class ActuatorSpec:
    """Idealized push/pull force actuator between two exoskeleton points."""
    name: str
    endpoint_a: tuple[str, tuple[float, float, float]]
    endpoint_b: tuple[str, tuple[float, float, float]]
    force_limit: float = 4000.0

    def __post_init__(self):
        if not self.force_limit > 0:
            raise ModelError(f"{self.name}: force_limit must be positive")
        if self.endpoint_a[0] == self.endpoint_b[0]:
            raise ModelError(f"{self.name}: endpoints must be on distinct segments")


class Pose(NamedTuple):
    rotation: np.ndarray     # 3x3
    translation: np.ndarray  # 3


# ----------------------------------------------------------------------
# default parameters

@dataclass
class ModelConfig:
    """All numeric model parameters, with defaults forming the reference model.

    Geometry values are for the left side at the reference pose (all
    coordinates zero, pelvis frame at the world origin); the right side is
    mirrored in z.  Every field can be overridden from a model config file
    (see :mod:`exosim.config`).
    """

    subject_mass: float = 65.9
    femur_length: float = 0.42
    tibia_length: float = 0.43
    ankle_height: float = 0.09
    hip_half_width: float = 0.09
    foot_length: float = 0.25

    # Winter anthropometric mass fractions of total body mass
    pelvis_mass_fraction: float = 0.142
    hat_mass_fraction: float = 0.536
    femur_mass_fraction: float = 0.100
    tibia_mass_fraction: float = 0.0465
    foot_mass_fraction: float = 0.0145

    # COM location fractions (distance from proximal joint / segment length)
    femur_com_fraction: float = 0.433
    tibia_com_fraction: float = 0.433

    # radii of gyration about the COM as fractions of segment length
    femur_rog_transverse: float = 0.323
    femur_rog_longitudinal: float = 0.13
    tibia_rog_transverse: float = 0.302
    tibia_rog_longitudinal: float = 0.10

    hat_offset: tuple = (0.0, 0.10, 0.0)
    hat_com: tuple = (0.0, 0.22, 0.0)
    hat_rog: tuple = (0.26, 0.14, 0.28)
    pelvis_com: tuple = (0.0, 0.02, 0.0)
    pelvis_rog: tuple = (0.10, 0.11, 0.09)
    foot_com: tuple = (0.07, -0.05, 0.0)
    foot_rog: tuple = (0.04, 0.065, 0.065)
    foot_contact_offset: tuple = (0.08, -0.09, 0.0)  # in foot frame, on ground when standing

    # exoskeleton mass properties (per part; pelvis/femur/tibia are per side)
    exo_load_support_mass: float = 3.0
    exo_load_support_inertia: tuple = (0.150, 0.050, 0.110)
    exo_load_support_com: tuple = (0.0, 0.05, 0.0)
    exo_pelvis_mass: float = 5.0
    exo_pelvis_inertia: tuple = (0.0181, 0.0311, 0.0172)
    exo_pelvis_com: tuple = (0.06, -0.02, 0.02)
    exo_femur_mass: float = 3.0
    exo_femur_inertia: tuple = (0.0640, 0.0011, 0.0640)
    exo_femur_com: tuple = (0.0, -0.21, 0.0)
    exo_femur_length: float = 0.42
    exo_tibia_mass: float = 2.0
    exo_tibia_inertia: tuple = (0.0420, 0.0007, 0.0420)
    exo_tibia_com: tuple = (0.0, -0.20, 0.0)
    exo_tibia_length: float = 0.40

    # exoskeleton joint anchors, local to the parent part (left side)
    tie_offset: tuple = (-0.12, 0.10, 0.0)               # pelvis -> load support
    exo_pelvis_anchor: tuple = (0.0, -0.08, 0.10)        # load support -> exo-pelvis
    exo_hip_anchor: tuple = (0.12, -0.035, 0.045)        # exo-pelvis -> exo-femur
    exo_knee_anchor: tuple = (0.0, -0.42, 0.0)           # exo-femur -> exo-tibia

    # strap parameters (both femur and tibia straps unless overridden)
    strap_stiffness: tuple = (160000.0, 1600.0, 1600.0)
    strap_damping: tuple = (400.0, 40.0, 40.0)
    strap_contact_area: float = 0.02
    femur_strap_body_point: tuple = (0.05, -0.25, 0.04)    # human femur frame
    femur_strap_exo_point: tuple = (0.05, -0.235, -0.015)  # exo-femur frame
    tibia_strap_body_point: tuple = (0.04, -0.22, 0.04)    # human tibia frame
    tibia_strap_exo_point: tuple = (0.04, -0.205, -0.015)  # exo-tibia frame

    # actuator endpoints (segment-local, left side) and symmetric force bound
    actuator_force_limit: float = 4000.0
    exo_pelvis_act_a: tuple = (0.0, -0.02, 0.16)    # on load support
    exo_pelvis_act_b: tuple = (0.0, -0.06, 0.06)    # on exo-pelvis
    exo_hip_act_a: tuple = (0.20, 0.06, 0.045)      # on exo-pelvis
    exo_hip_act_b: tuple = (0.06, -0.135, 0.0)      # on exo-femur
    exo_knee_act_a: tuple = (0.06, -0.32, 0.0)      # on exo-femur
    exo_knee_act_b: tuple = (0.07, -0.10, 0.0)      # on exo-tibia

    hip_limits: tuple = ((-0.7, 2.1), (-0.9, 0.9), (-1.0, 1.0))
    knee_limits: tuple = ((-2.3, 0.35),)
    ankle_limits: tuple = ((-1.0, 0.8),)
    exo_limits: tuple = ((-0.9, 0.9), (-0.9, 2.1), (-2.3, 0.35))


def _mirror(v):
    return (v[0], v[1], -v[2])


@dataclass(frozen=True)
class TieConstraint:
    parent: str
    child: str
    offset: tuple[float, float, float]


@dataclass(frozen=True)
class ModelAssembly:
    """The assembled human + exoskeleton model and its combined tree."""
    human_segments: dict[str, BodySegment]
    exo_segments: dict[str, BodySegment]
    joints: tuple[JointSpec, ...]
    actuators: tuple[ActuatorSpec, ...]
    straps: tuple[StrapElement, ...]
    tie: TieConstraint
    subject_mass: float
    config: ModelConfig
    tree: KinematicTree = field(repr=False)
    dof_names: tuple[str, ...]
    human_dofs: np.ndarray = field(repr=False)
    exo_dofs: np.ndarray = field(repr=False)
    lower_dofs: np.ndarray = field(repr=False)     # the 8 hip/knee DOFs
    human_bodies: np.ndarray = field(repr=False)
    exo_bodies: np.ndarray = field(repr=False)
    coordinate_limits: dict[str, tuple[float, float]] = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.tree.ndof

    @property
    def exo_mass(self) -> float:
        return sum(s.mass for s in self.exo_segments.values())

    @property
    def total_mass(self) -> float:
        return self.subject_mass + self.exo_mass

    def dof_index(self, name: str) -> int:
        try:
            return self.dof_names.index(name)
        except ValueError:
            raise KeyError(f"unknown coordinate '{name}'") from None

    def segment(self, name: str) -> BodySegment:
        if name in self.human_segments:
            return self.human_segments[name]
        if name in self.exo_segments:
            return self.exo_segments[name]
        raise KeyError(f"unknown segment '{name}'")


# ----------------------------------------------------------------------
# builder

def _human_segments(cfg: ModelConfig) -> dict[str, BodySegment]:
    m = cfg.subject_mass
    lf, lt = cfg.femur_length, cfg.tibia_length
    mf = m * cfg.femur_mass_fraction
    mt = m * cfg.tibia_mass_fraction
    mft = m * cfg.foot_mass_fraction
    fem_inertia = (mf * (cfg.femur_rog_transverse * lf) ** 2,
                   mf * (cfg.femur_rog_longitudinal * lf) ** 2,
                   mf * (cfg.femur_rog_transverse * lf) ** 2)
    tib_inertia = (mt * (cfg.tibia_rog_transverse * lt) ** 2,
                   mt * (cfg.tibia_rog_longitudinal * lt) ** 2,
                   mt * (cfg.tibia_rog_transverse * lt) ** 2)
    foot_inertia = tuple(mft * r ** 2 for r in cfg.foot_rog)
    pelvis_inertia = tuple(m * cfg.pelvis_mass_fraction * r ** 2 for r in cfg.pelvis_rog)
    hat_inertia = tuple(m * cfg.hat_mass_fraction * r ** 2 for r in cfg.hat_rog)

    segs = {}
    segs["pelvis"] = BodySegment("pelvis", m * cfg.pelvis_mass_fraction,
                                 pelvis_inertia, cfg.pelvis_com, 0.2)
    segs["hat"] = BodySegment("hat", m * cfg.hat_mass_fraction,
                              hat_inertia, cfg.hat_com, 0.6)
    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        segs[f"femur_{side}"] = BodySegment(
            f"femur_{side}", mf, fem_inertia,
            mirror((0.0, -cfg.femur_com_fraction * lf, 0.0)), lf)
        segs[f"tibia_{side}"] = BodySegment(
            f"tibia_{side}", mt, tib_inertia,
            mirror((0.0, -cfg.tibia_com_fraction * lt, 0.0)), lt)
        segs[f"foot_{side}"] = BodySegment(
            f"foot_{side}", mft, foot_inertia, mirror(cfg.foot_com), cfg.foot_length)
    return segs


def _exo_segments(cfg: ModelConfig) -> dict[str, BodySegment]:
    segs = {"exo_load_support": BodySegment(
        "exo_load_support", cfg.exo_load_support_mass,
        cfg.exo_load_support_inertia, cfg.exo_load_support_com, 0.3)}
    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        segs[f"exo_pelvis_{side}"] = BodySegment(
            f"exo_pelvis_{side}", cfg.exo_pelvis_mass, cfg.exo_pelvis_inertia,
            mirror(cfg.exo_pelvis_com), 0.2)
        segs[f"exo_femur_{side}"] = BodySegment(
            f"exo_femur_{side}", cfg.exo_femur_mass, cfg.exo_femur_inertia,
            mirror(cfg.exo_femur_com), cfg.exo_femur_length)
        segs[f"exo_tibia_{side}"] = BodySegment(
            f"exo_tibia_{side}", cfg.exo_tibia_mass, cfg.exo_tibia_inertia,
            mirror(cfg.exo_tibia_com), cfg.exo_tibia_length)
    return segs


def build_default_assembly(config: ModelConfig | None = None) -> ModelAssembly:
    """Assemble the combined human + exoskeleton model.

    With the default config the exoskeleton parts sum to 23 kg and the
    combined system to 88.9 kg.  Raises :class:`ModelError` naming the
    offending field for invalid mass/inertia values.
    """
    cfg = config or ModelConfig()
    human = _human_segments(cfg)
    exo = _exo_segments(cfg)

    tree = KinematicTree()
    joints: list[JointSpec] = []
    limits: dict[str, tuple[float, float]] = {}

    # --- human root: 3 prismatic world axes + intrinsic x-y-z rotations
    f = tree.add_prismatic(-1, (1, 0, 0), "root_tx")
    f = tree.add_prismatic(f, (0, 1, 0), "root_ty")
    f = tree.add_prismatic(f, (0, 0, 1), "root_tz")
    f = tree.add_revolute(f, (1, 0, 0), "root_rx")
    f = tree.add_revolute(f, (0, 1, 0), "root_ry")
    pelvis_frame = tree.add_revolute(f, (0, 0, 1), "root_rz")
    tree.add_body(pelvis_frame, "pelvis", human["pelvis"].mass,
                  human["pelvis"].inertia_diag, human["pelvis"].com_offset)
    joints.append(JointSpec("root", "free-6dof", "world", "pelvis",
                            "prescribed-ID", (0.0, 0.0, 0.0)))

    hat_frame = tree.add_fixed(pelvis_frame, cfg.hat_offset, "hat_joint")
    tree.add_body(hat_frame, "hat", human["hat"].mass,
                  human["hat"].inertia_diag, human["hat"].com_offset)
    joints.append(JointSpec("hat_joint", "fixed", "pelvis", "hat",
                            "prescribed-ID", cfg.hat_offset))

    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        hip_anchor = (0.0, 0.0, sgn * cfg.hip_half_width)
        add_axis = (sgn, 0.0, 0.0)       # positive = adduction on both sides
        rot_axis = (0.0, -sgn, 0.0)      # positive = internal rotation
        f = tree.add_fixed(pelvis_frame, hip_anchor, f"hip_anchor_{side}")
        f = tree.add_revolute(f, (0, 0, 1), f"hip_flexion_{side}")
        f = tree.add_revolute(f, add_axis, f"hip_adduction_{side}")
        femur_frame = tree.add_revolute(f, rot_axis, f"hip_rotation_{side}")
        seg = human[f"femur_{side}"]
        tree.add_body(femur_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"hip_{side}", "spherical-3dof", "pelvis",
                                seg.name, "prescribed-ID", hip_anchor,
                                coordinate_limits=cfg.hip_limits))
        for nm, lim in zip((f"hip_flexion_{side}", f"hip_adduction_{side}",
                            f"hip_rotation_{side}"), cfg.hip_limits):
            limits[nm] = lim

        f = tree.add_fixed(femur_frame, (0.0, -cfg.femur_length, 0.0),
                           f"knee_anchor_{side}")
        tibia_frame = tree.add_revolute(f, (0, 0, 1), f"knee_angle_{side}")
        seg = human[f"tibia_{side}"]
        tree.add_body(tibia_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"knee_{side}", "revolute-1dof", f"femur_{side}",
                                seg.name, "prescribed-ID",
                                (0.0, -cfg.femur_length, 0.0), axis=(0, 0, 1),
                                coordinate_limits=cfg.knee_limits))
        limits[f"knee_angle_{side}"] = cfg.knee_limits[0]

        f = tree.add_fixed(tibia_frame, (0.0, -cfg.tibia_length, 0.0),
                           f"ankle_anchor_{side}")
        foot_frame = tree.add_revolute(f, (0, 0, 1), f"ankle_angle_{side}")
        seg = human[f"foot_{side}"]
        tree.add_body(foot_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"ankle_{side}", "revolute-1dof", f"tibia_{side}",
                                seg.name, "prescribed-ID",
                                (0.0, -cfg.tibia_length, 0.0), axis=(0, 0, 1),
                                coordinate_limits=cfg.ankle_limits))
        limits[f"ankle_angle_{side}"] = cfg.ankle_limits[0]

    # --- exoskeleton: load support tied to the pelvis, then two 3R chains
    ls_frame = tree.add_fixed(pelvis_frame, cfg.tie_offset, "tie")
    seg = exo["exo_load_support"]
    tree.add_body(ls_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
    tie = TieConstraint("pelvis", "exo_load_support", cfg.tie_offset)
    joints.append(JointSpec("tie", "fixed", "pelvis", "exo_load_support",
                            "prescribed-ID", cfg.tie_offset))

    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        abd_axis = (sgn, 0.0, 0.0)       # positive = toward midline, both sides
        f = tree.add_fixed(ls_frame, mirror(cfg.exo_pelvis_anchor),
                           f"exo_pelvis_anchor_{side}")
        ep_frame = tree.add_revolute(f, abd_axis, f"exo_pelvis_{side}")
        seg = exo[f"exo_pelvis_{side}"]
        tree.add_body(ep_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"exo_pelvis_joint_{side}", "revolute-1dof",
                                "exo_load_support", seg.name, "free-FD",
                                mirror(cfg.exo_pelvis_anchor), axis=abd_axis,
                                coordinate_limits=(cfg.exo_limits[0],)))
        limits[f"exo_pelvis_{side}"] = cfg.exo_limits[0]

        f = tree.add_fixed(ep_frame, mirror(cfg.exo_hip_anchor),
                           f"exo_hip_anchor_{side}")
        ef_frame = tree.add_revolute(f, (0, 0, 1), f"exo_hip_{side}")
        seg = exo[f"exo_femur_{side}"]
        tree.add_body(ef_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"exo_hip_joint_{side}", "revolute-1dof",
                                f"exo_pelvis_{side}", seg.name, "free-FD",
                                mirror(cfg.exo_hip_anchor), axis=(0, 0, 1),
                                coordinate_limits=(cfg.exo_limits[1],)))
        limits[f"exo_hip_{side}"] = cfg.exo_limits[1]

        f = tree.add_fixed(ef_frame, mirror(cfg.exo_knee_anchor),
                           f"exo_knee_anchor_{side}")
        et_frame = tree.add_revolute(f, (0, 0, 1), f"exo_knee_{side}")
        seg = exo[f"exo_tibia_{side}"]
        tree.add_body(et_frame, seg.name, seg.mass, seg.inertia_diag, seg.com_offset)
        joints.append(JointSpec(f"exo_knee_joint_{side}", "revolute-1dof",
                                f"exo_femur_{side}", seg.name, "free-FD",
                                mirror(cfg.exo_knee_anchor), axis=(0, 0, 1),
                                coordinate_limits=(cfg.exo_limits[2],)))
        limits[f"exo_knee_{side}"] = cfg.exo_limits[2]

    # --- straps and actuators
    straps = []
    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        straps.append(StrapElement(
            name=f"femur_{side}",
            exo_point=(f"exo_femur_{side}", mirror(cfg.femur_strap_exo_point)),
            body_point=(f"femur_{side}", mirror(cfg.femur_strap_body_point)),
            stiffness=cfg.strap_stiffness, damping=cfg.strap_damping,
            contact_area=cfg.strap_contact_area))
        straps.append(StrapElement(
            name=f"tibia_{side}",
            exo_point=(f"exo_tibia_{side}", mirror(cfg.tibia_strap_exo_point)),
            body_point=(f"tibia_{side}", mirror(cfg.tibia_strap_body_point)),
            stiffness=cfg.strap_stiffness, damping=cfg.strap_damping,
            contact_area=cfg.strap_contact_area))
    # fixed ordering: femur_l, femur_r, tibia_l, tibia_r
    straps.sort(key=lambda s: ("femur" not in s.name, s.name))
    straps = tuple(straps)

    actuators = []
    for side, sgn in (("l", 1.0), ("r", -1.0)):
        mirror = (lambda v: v) if sgn > 0 else _mirror
        actuators.append(ActuatorSpec(
            f"exo_pelvis_{side}",
            ("exo_load_support", mirror(cfg.exo_pelvis_act_a)),
            (f"exo_pelvis_{side}", mirror(cfg.exo_pelvis_act_b)),
            cfg.actuator_force_limit))
        actuators.append(ActuatorSpec(
            f"exo_hip_{side}",
            (f"exo_pelvis_{side}", mirror(cfg.exo_hip_act_a)),
            (f"exo_femur_{side}", mirror(cfg.exo_hip_act_b)),
            cfg.actuator_force_limit))
        actuators.append(ActuatorSpec(
            f"exo_knee_{side}",
            (f"exo_femur_{side}", mirror(cfg.exo_knee_act_a)),
            (f"exo_tibia_{side}", mirror(cfg.exo_knee_act_b)),
            cfg.actuator_force_limit))
    # fixed ordering matching EXO_DOF_NAMES
    order = {n: i for i, n in enumerate(EXO_DOF_NAMES)}
    actuators.sort(key=lambda a: order[a.name])
    actuators = tuple(actuators)

    dof_names = HUMAN_DOF_NAMES + EXO_DOF_NAMES
    tree_names = tuple(fr.name for fr in tree.frames if fr.kind != 0 and fr.dof >= 0)
    # tree DOF order must match the published layout
    ordered = [None] * tree.ndof
    for fr in tree.frames:
        if fr.dof >= 0:
            ordered[fr.dof] = fr.name
    assert tuple(ordered) == dof_names, (ordered, dof_names)

    human_bodies = np.array([tree.body_index(n) for n in human])
    exo_bodies = np.array([tree.body_index(n) for n in exo])
    lower = np.array([dof_names.index(n) for n in LOWER_DOF_NAMES])

    return ModelAssembly(
        human_segments=human, exo_segments=exo, joints=tuple(joints),
        actuators=actuators, straps=straps, tie=tie,
        subject_mass=cfg.subject_mass, config=cfg, tree=tree,
        dof_names=dof_names,
        human_dofs=np.arange(N_HUMAN_DOF),
        exo_dofs=np.arange(N_HUMAN_DOF, N_HUMAN_DOF + N_EXO_DOF),
        lower_dofs=lower,
        human_bodies=human_bodies, exo_bodies=exo_bodies,
        coordinate_limits=limits)


# ----------------------------------------------------------------------
# kinematic queries (thin wrappers over the tree)

def full_coordinates(assembly: ModelAssembly, q_h, q_e=None) -> np.ndarray:
    """Stack human and exoskeleton coordinates into the combined layout."""
    q = np.zeros(assembly.ndof)
    q[assembly.human_dofs] = q_h
    if q_e is not None:
        q[assembly.exo_dofs] = q_e
    return q


def forward_kinematics(assembly: ModelAssembly, q) -> dict[str, Pose]:
    """World pose of every segment at coordinates ``q`` (stacked layout)."""
    st = assembly.tree.fk(q)
    out = {}
    for b in assembly.tree.bodies:
        out[b.name] = Pose(st.R[b.frame].copy(), st.p[b.frame].copy())
    return out


def point_jacobian(assembly: ModelAssembly, q, segment: str, local_point) -> np.ndarray:
    """3 x N Jacobian mapping generalized velocities to a point's world velocity."""
    st = assembly.tree.fk(q)
    return assembly.tree.point_jacobian(st, assembly.tree.body_index(segment), local_point)


def com_kinematics(assembly: ModelAssembly, q, qd, qdd):
    """Per-segment COM position/velocity/acceleration as name -> (p, v, a)."""
    st = assembly.tree.fk(q, qd, qdd)
    out = {}
    for b in assembly.tree.bodies:
        i = b.index
        out[b.name] = (st.com_p[i].copy(), st.com_v[i].copy(), st.com_a[i].copy())
    return out


def exo_pose_matching_human(assembly: ModelAssembly, q_h) -> np.ndarray:
    """Exoskeleton coordinates that mirror the human hip/knee pose.

    Used to start simulations with the exoskeleton aligned to the wearer so
    the strap transient stays small.
    """
    q_h = np.asarray(q_h, float)
    idx = {n: i for i, n in enumerate(HUMAN_DOF_NAMES)}
    return np.array([
        q_h[idx["hip_adduction_l"]], q_h[idx["hip_flexion_l"]], q_h[idx["knee_angle_l"]],
        q_h[idx["hip_adduction_r"]], q_h[idx["hip_flexion_r"]], q_h[idx["knee_angle_r"]],
    ])


# ----------------------------------------------------------------------
# validation

def validate_assembly(assembly: ModelAssembly) -> list[str]:
    """Check every structural invariant; returns one message per violation."""
    issues: list[str] = []
    for seg in list(assembly.human_segments.values()) + list(assembly.exo_segments.values()):
        if not seg.mass > 0:
            issues.append(f"segment {seg.name}: non-positive mass {seg.mass}")
        ixx, iyy, izz = seg.inertia_diag
        if min(ixx, iyy, izz) < 0:
            issues.append(f"segment {seg.name}: negative inertia component")
        if ixx > iyy + izz + 1e-12 or iyy > ixx + izz + 1e-12 or izz > ixx + iyy + 1e-12:
            issues.append(f"segment {seg.name}: inertia triangle inequality violated")

    exo_joint_count = 0
    for j in assembly.joints:
        if j.kind == "revolute-1dof":
            if j.axis is None:
                issues.append(f"joint {j.name}: revolute joint without axis")
            elif abs(np.linalg.norm(j.axis) - 1.0) > 1e-9:
                issues.append(f"joint {j.name}: axis is not unit length")
        if j.mode == "free-FD":
            exo_joint_count += 1
            if not j.parent.startswith("exo") and j.parent != "exo_load_support":
                issues.append(f"joint {j.name}: free-FD joint on a human segment")
        elif j.mode == "prescribed-ID":
            if j.child.startswith("exo") and j.kind != "fixed":
                issues.append(f"joint {j.name}: exoskeleton joint must be free-FD")
        else:
            issues.append(f"joint {j.name}: unknown mode '{j.mode}'")

    if len(assembly.exo_segments) != 7:
        issues.append(
            f"exoskeleton has {len(assembly.exo_segments)} segments, expected 7")
    if exo_joint_count != 6:
        issues.append(
            f"exoskeleton has {exo_joint_count} free joints, expected 6")
    if len(assembly.actuators) != 6:
        issues.append(f"expected 6 actuators, found {len(assembly.actuators)}")
    if len(assembly.straps) != 4:
        issues.append(f"expected 4 straps, found {len(assembly.straps)}")
    for s in assembly.straps:
        if min(s.stiffness) < 0 or min(s.damping) < 0:
            issues.append(f"strap {s.name}: negative stiffness or damping")
        if not s.contact_area > 0:
            issues.append(f"strap {s.name}: non-positive contact area")
    for a in assembly.actuators:
        if not a.force_limit > 0:
            issues.append(f"actuator {a.name}: non-positive force limit")

    # children must each have exactly one parent joint (acyclic by construction)
    children = [j.child for j in assembly.joints]
    for name, count in {c: children.count(c) for c in children}.items():
        if count != 1:
            issues.append(f"segment {name}: has {count} parent joints")
    return issues
