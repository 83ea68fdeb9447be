import numpy as np
import pytest

from exosim import (ModelConfig, ModelError, build_default_assembly,
                    com_kinematics, forward_kinematics, point_jacobian,
                    validate_assembly)
from exosim.kinematics import rotation_about
from exosim.model import EXO_DOF_NAMES, HUMAN_DOF_NAMES, full_coordinates

RNG = np.random.default_rng(42)


@pytest.fixture(scope="module")
def assembly():
    return build_default_assembly()


def random_q(assembly, scale=0.4):
    q = RNG.uniform(-scale, scale, assembly.ndof)
    q[assembly.dof_index("root_ty")] += 0.9
    return q


def test_default_exo_mass_matches_table(assembly):
    # 3 + 2*5 + 2*3 + 2*2 = 23 kg
    assert assembly.exo_mass == pytest.approx(23.0, abs=1e-12)
    parts = assembly.exo_segments
    assert parts["exo_load_support"].mass == 3.0
    for side in "lr":
        assert parts[f"exo_pelvis_{side}"].mass == 5.0
        assert parts[f"exo_femur_{side}"].mass == 3.0
        assert parts[f"exo_tibia_{side}"].mass == 2.0


def test_total_system_mass(assembly):
    assert assembly.subject_mass == pytest.approx(65.9)
    assert assembly.total_mass == pytest.approx(88.9, abs=1e-12)
    human_sum = sum(s.mass for s in assembly.human_segments.values())
    assert human_sum == pytest.approx(65.9, abs=1e-9)


def test_negative_mass_rejected():
    cfg = ModelConfig(exo_femur_mass=-1.0)
    with pytest.raises(ModelError, match="exo_femur"):
        build_default_assembly(cfg)


def test_inertia_triangle_rejected():
    cfg = ModelConfig(exo_tibia_inertia=(1.0, 0.1, 0.1))
    with pytest.raises(ModelError, match="triangle"):
        build_default_assembly(cfg)


def test_table1_inertias(assembly):
    assert assembly.exo_segments["exo_load_support"].inertia_diag == (0.150, 0.050, 0.110)
    assert assembly.exo_segments["exo_pelvis_l"].inertia_diag == (0.0181, 0.0311, 0.0172)
    assert assembly.exo_segments["exo_femur_r"].inertia_diag == (0.0640, 0.0011, 0.0640)
    assert assembly.exo_segments["exo_tibia_l"].inertia_diag == (0.0420, 0.0007, 0.0420)


def test_dof_layout(assembly):
    assert assembly.dof_names == HUMAN_DOF_NAMES + EXO_DOF_NAMES
    assert assembly.ndof == 22


# ----------------------------------------------------------------------
# forward kinematics

def test_fk_zero_is_reference(assembly):
    poses = forward_kinematics(assembly, np.zeros(assembly.ndof))
    np.testing.assert_allclose(poses["pelvis"].translation, 0.0, atol=1e-15)
    np.testing.assert_allclose(poses["pelvis"].rotation, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(poses["tibia_l"].translation, [0, -0.42, 0.09], atol=1e-12)
    np.testing.assert_allclose(poses["foot_r"].translation, [0, -0.85, -0.09], atol=1e-12)


def test_fk_single_knee_rotation(assembly):
    theta = -0.7
    q = np.zeros(assembly.ndof)
    q[assembly.dof_index("knee_angle_l")] = theta
    poses = forward_kinematics(assembly, q)
    # tibia frame rotated by theta about the z axis through the knee anchor
    np.testing.assert_allclose(poses["tibia_l"].rotation,
                               rotation_about((0, 0, 1), theta), atol=1e-12)
    np.testing.assert_allclose(poses["tibia_l"].translation, [0, -0.42, 0.09], atol=1e-12)
    # foot is carried around the knee
    expect = np.array([0, -0.42, 0.09]) + rotation_about((0, 0, 1), theta) @ [0, -0.43, 0]
    np.testing.assert_allclose(poses["foot_l"].translation, expect, atol=1e-12)


def test_fk_half_step_composition(assembly):
    # rotation composition oracle: two half-angle FK steps equal one full step
    name = "hip_flexion_r"
    for theta in RNG.uniform(-1.2, 1.2, 5):
        q_full = np.zeros(assembly.ndof)
        q_full[assembly.dof_index(name)] = theta
        R_full = forward_kinematics(assembly, q_full)["femur_r"].rotation
        q_half = np.zeros(assembly.ndof)
        q_half[assembly.dof_index(name)] = theta / 2
        R_half = forward_kinematics(assembly, q_half)["femur_r"].rotation
        base = forward_kinematics(assembly, np.zeros(assembly.ndof))["femur_r"].rotation
        # R(theta) = R(theta/2) applied twice about the same body axis
        np.testing.assert_allclose(R_half @ base.T @ R_half, R_full, atol=1e-12)


def test_fk_dimension_error(assembly):
    with pytest.raises(ValueError, match="length"):
        forward_kinematics(assembly, np.zeros(5))


# ----------------------------------------------------------------------
# point jacobian

def test_jacobian_finite_difference(assembly):
    # oracle: (FK(q + eps e_k) - FK(q)) / eps column-by-column
    eps = 1e-7
    for trial in range(4):
        q = random_q(assembly)
        segment = ["tibia_l", "foot_r", "exo_tibia_l", "exo_femur_r"][trial]
        local = RNG.uniform(-0.1, 0.1, 3)
        J = point_jacobian(assembly, q, segment, local)
        bidx = assembly.tree.body_index(segment)
        st0 = assembly.tree.fk(q)
        p0 = assembly.tree.point_world(st0, bidx, local)
        J_fd = np.empty_like(J)
        for k in range(assembly.ndof):
            qk = q.copy()
            qk[k] += eps
            stk = assembly.tree.fk(qk)
            J_fd[:, k] = (assembly.tree.point_world(stk, bidx, local) - p0) / eps
        scale = max(1.0, np.abs(J).max())
        assert np.abs(J - J_fd).max() / scale < 1e-5


def test_jacobian_zero_for_off_path_joints(assembly):
    q = random_q(assembly)
    J = point_jacobian(assembly, q, "tibia_l", [0.0, -0.1, 0.0])
    for name in ("hip_flexion_r", "knee_angle_r", "ankle_angle_l",
                 "exo_hip_l", "exo_knee_r"):
        np.testing.assert_allclose(J[:, assembly.dof_index(name)], 0.0, atol=1e-15)


def test_jacobian_root_translation_identity(assembly):
    q = random_q(assembly)
    J = point_jacobian(assembly, q, "foot_l", [0.05, -0.05, 0.0])
    np.testing.assert_allclose(J[:, 0:3], np.eye(3), atol=1e-14)


def test_jacobian_zero_moment_arm(assembly):
    # a point on the knee axis has no velocity from the knee DOF
    q = random_q(assembly)
    J = point_jacobian(assembly, q, "tibia_r", [0.0, 0.0, 0.02])
    np.testing.assert_allclose(J[:, assembly.dof_index("knee_angle_r")], 0.0, atol=1e-12)


def test_jacobian_unknown_segment(assembly):
    with pytest.raises(KeyError, match="unknown segment"):
        point_jacobian(assembly, np.zeros(assembly.ndof), "shin_l", [0, 0, 0])


# ----------------------------------------------------------------------
# com kinematics

def test_com_static(assembly):
    q = random_q(assembly)
    kin = com_kinematics(assembly, q, np.zeros(assembly.ndof), np.zeros(assembly.ndof))
    for name, (p, v, a) in kin.items():
        np.testing.assert_allclose(v, 0.0, atol=1e-15)
        np.testing.assert_allclose(a, 0.0, atol=1e-15)


def test_com_rigid_vertical_acceleration(assembly):
    q = random_q(assembly)
    qdd = np.zeros(assembly.ndof)
    qdd[assembly.dof_index("root_ty")] = 3.7
    kin = com_kinematics(assembly, q, np.zeros(assembly.ndof), qdd)
    for name, (p, v, a) in kin.items():
        np.testing.assert_allclose(a, [0.0, 3.7, 0.0], atol=1e-12)


def test_com_acceleration_central_difference(assembly):
    # oracle: second central difference of COM positions under the exact
    # quadratic coordinate path q(t) = q + qd t + 0.5 qdd t^2
    q = random_q(assembly)
    qd = RNG.uniform(-1.0, 1.0, assembly.ndof)
    qdd = RNG.uniform(-3.0, 3.0, assembly.ndof)
    dt = 1e-4
    kin = com_kinematics(assembly, q, qd, qdd)
    km = com_kinematics(assembly, q - qd * dt + 0.5 * qdd * dt * dt,
                        np.zeros(assembly.ndof), np.zeros(assembly.ndof))
    kp = com_kinematics(assembly, q + qd * dt + 0.5 * qdd * dt * dt,
                        np.zeros(assembly.ndof), np.zeros(assembly.ndof))
    for name in kin:
        a = kin[name][2]
        a_fd = (kp[name][0] - 2 * kin[name][0] + km[name][0]) / dt ** 2
        scale = max(1.0, np.abs(a).max())
        assert np.abs(a - a_fd).max() / scale < 1e-3


def test_com_dimension_mismatch(assembly):
    with pytest.raises(ValueError):
        com_kinematics(assembly, np.zeros(assembly.ndof), np.zeros(3), np.zeros(assembly.ndof))


# ----------------------------------------------------------------------
# validation

def test_validate_default_empty(assembly):
    assert validate_assembly(assembly) == []


def test_validate_bad_axis(assembly):
    import dataclasses
    revolute = next(j for j in assembly.joints if j.kind == "revolute-1dof")
    bad_joint = dataclasses.replace(revolute, axis=(0.0, 0.0, 2.0))
    joints = tuple(bad_joint if j.name == bad_joint.name else j for j in assembly.joints)
    broken = dataclasses.replace(assembly, joints=joints)
    issues = validate_assembly(broken)
    assert any("unit" in msg and bad_joint.name in msg for msg in issues)


def test_validate_missing_exo_joint(assembly):
    import dataclasses
    joints = tuple(j for j in assembly.joints if j.name != "exo_knee_joint_r")
    broken = dataclasses.replace(assembly, joints=joints)
    issues = validate_assembly(broken)
    assert any("5 free joints" in msg for msg in issues)


def test_tie_constraint_tracks_pelvis(assembly):
    # load support pose must equal the pelvis pose composed with the fixed offset
    for _ in range(3):
        q = random_q(assembly)
        poses = forward_kinematics(assembly, q)
        pr, pp = poses["pelvis"]
        lr, lp = poses["exo_load_support"]
        np.testing.assert_allclose(lr, pr, atol=1e-12)
        np.testing.assert_allclose(lp, pp + pr @ assembly.tie.offset, atol=1e-12)
