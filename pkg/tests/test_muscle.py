import numpy as np
import pytest

from exosim import build_default_assembly
from exosim.model import LOWER_DOF_NAMES
from exosim.muscle import (MuscleActuator, default_muscle_set, knee_axial_reaction,
                           moment_arm_matrix, solve_muscle_forces)

RNG = np.random.default_rng(23)


@pytest.fixture(scope="module")
def muscles():
    return default_muscle_set()


@pytest.fixture(scope="module")
def assembly():
    return build_default_assembly()


# ----------------------------------------------------------------------
# moment arm matrix

def test_uniarticular_knee_extensor_span(muscles):
    R = moment_arm_matrix(muscles, np.zeros(8))
    i = [m.name for m in muscles].index("vas_lat_l")
    knee_row = LOWER_DOF_NAMES.index("knee_angle_l")
    assert R[knee_row, i] > 0            # extension-positive by convention
    others = np.delete(R[:, i], knee_row)
    np.testing.assert_array_equal(others, 0.0)


def test_biarticular_rectus_span(muscles):
    R = moment_arm_matrix(muscles, np.zeros(8))
    i = [m.name for m in muscles].index("rect_fem_r")
    hip_row = LOWER_DOF_NAMES.index("hip_flexion_r")
    knee_row = LOWER_DOF_NAMES.index("knee_angle_r")
    assert R[hip_row, i] > 0 and R[knee_row, i] > 0
    assert np.count_nonzero(R[:, i]) == 2


def test_tendon_excursion_oracle(muscles):
    # finite difference of musculotendon length vs arms: arm = -dL/dq
    eps = 1e-6
    q8 = RNG.uniform(-0.4, 0.4, 8)
    for m in muscles:
        arms = m.moment_arms(q8)
        for dof, r in arms.items():
            k = LOWER_DOF_NAMES.index(dof)
            qp, qm = q8.copy(), q8.copy()
            qp[k] += eps
            qm[k] -= eps
            dL = (m.length(qp) - m.length(qm)) / (2 * eps)
            assert -dL == pytest.approx(r, abs=1e-4)


# ----------------------------------------------------------------------
# force optimization

def test_zero_demand(muscles):
    sol = solve_muscle_forces(np.zeros(8), muscles, np.zeros(16))
    np.testing.assert_allclose(sol.forces, 0.0, atol=1e-9)
    np.testing.assert_allclose(sol.residual, 0.0, atol=1e-10)
    assert sol.objective == pytest.approx(0.0, abs=1e-15)


def test_two_muscle_closed_form():
    # symmetric stationarity: a = tau r w f_max / (1 + 2 w r^2 f_max^2)
    r, f_max, w, tau = 0.04, 1500.0, 100.0, 60.0
    pair = tuple(MuscleActuator(name=f"m{i}", side="l", f_max=f_max,
                                arms={"knee_angle_l": r}) for i in range(2))
    demand = np.zeros(8)
    demand[LOWER_DOF_NAMES.index("knee_angle_l")] = tau
    sol = solve_muscle_forces(demand, pair, np.zeros(16), w=w)
    a_expect = tau * r * w * f_max / (1.0 + 2.0 * w * r * r * f_max * f_max)
    assert 0 < a_expect < 1  # bounds inactive for this case
    assert sol.forces[0] == pytest.approx(sol.forces[1], rel=1e-9)
    np.testing.assert_allclose(sol.activations, a_expect, rtol=1e-8)


def test_saturation(muscles):
    demand = np.zeros(8)
    demand[LOWER_DOF_NAMES.index("knee_angle_l")] = 2000.0  # beyond capacity
    sol = solve_muscle_forces(demand, muscles, np.zeros(16))
    names = [m.name for m in muscles]
    for nm in ("vas_lat_l", "vas_med_l", "rect_fem_l"):
        assert sol.activations[names.index(nm)] == pytest.approx(1.0, abs=1e-6)
    assert np.linalg.norm(sol.residual) > 1.0
    assert sol.activations.max() <= 1.0 + 1e-12
    assert sol.forces.min() >= -1e-12


def test_monotone_residual_in_w(muscles):
    demand = RNG.uniform(-150, 150, 8)
    norms = []
    for w in (1.0, 10.0, 100.0, 1000.0):
        sol = solve_muscle_forces(demand, muscles, np.zeros(16), w=w)
        norms.append(np.linalg.norm(sol.residual))
    assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))


def test_scaling_invariance():
    # f_max * s and arms / s leave produced torques unchanged at interior optima
    r, f_max, tau = 0.05, 1200.0, 40.0
    demand = np.zeros(8)
    demand[3] = tau
    base = (MuscleActuator(name="m", side="l", f_max=f_max, arms={"knee_angle_l": r}),)
    s = 3.0
    scaled = (MuscleActuator(name="m", side="l", f_max=f_max * s,
                             arms={"knee_angle_l": r / s}),)
    t1 = moment_arm_matrix(base, np.zeros(8)) @ solve_muscle_forces(
        demand, base, np.zeros(16)).forces
    t2 = moment_arm_matrix(scaled, np.zeros(8)) @ solve_muscle_forces(
        demand, scaled, np.zeros(16)).forces
    np.testing.assert_allclose(t1, t2, rtol=1e-8)


def test_kkt_projection(muscles):
    # projected gradient of the QP vanishes at the reported solution
    for _ in range(25):
        demand = RNG.uniform(-250, 250, 8)
        w = 100.0
        sol = solve_muscle_forces(demand, muscles, np.zeros(16), w=w)
        R = moment_arm_matrix(muscles, np.zeros(8))
        f_max = np.array([m.f_max for m in muscles])
        f = sol.forces
        g = 2 * f / f_max ** 2 - 2 * w * R.T @ (demand - R @ f)
        proj = np.where((f <= 1e-9) & (g > 0), 0.0, g)
        proj = np.where((f >= f_max - 1e-9) & (proj < 0), 0.0, proj)
        scale = max(1.0, np.abs(g).max())
        assert np.abs(proj).max() / scale <= 1e-8


def test_invalid_exponent(muscles):
    with pytest.raises(ValueError, match="p = 2"):
        solve_muscle_forces(np.zeros(8), muscles, np.zeros(16), p=3)


# ----------------------------------------------------------------------
# knee axial reaction

def test_reaction_equals_intersegmental_without_muscles(assembly, muscles):
    f_inter = np.array([0.0, -500.0, 0.0])
    r = knee_axial_reaction(assembly, np.zeros(16), f_inter,
                            np.zeros(len(muscles)), muscles, side="l")
    assert r == pytest.approx(-500.0)  # straight leg: tibia axis is vertical


def test_reaction_muscle_projection(assembly, muscles):
    # a knee extensor force f at angle theta adds -f cos(theta)
    names = [m.name for m in muscles]
    i = names.index("vas_lat_l")
    theta = muscles[i].axial_angle
    forces = np.zeros(len(muscles))
    base = knee_axial_reaction(assembly, np.zeros(16), np.zeros(3), forces, muscles, "l")
    forces[i] = 900.0
    with_f = knee_axial_reaction(assembly, np.zeros(16), np.zeros(3), forces, muscles, "l")
    assert with_f - base == pytest.approx(-900.0 * np.cos(theta), rel=1e-12)


def test_reaction_ignores_other_side(assembly, muscles):
    names = [m.name for m in muscles]
    forces = np.zeros(len(muscles))
    forces[names.index("vas_lat_r")] = 700.0
    r = knee_axial_reaction(assembly, np.zeros(16), np.zeros(3), forces, muscles, "l")
    assert r == pytest.approx(0.0)


def test_reaction_follows_tibia_axis(assembly, muscles):
    # flexed knee tilts the tibia: vertical force projects with cos(knee angle)
    q_h = np.zeros(16)
    q_h[9] = -0.6
    f_inter = np.array([0.0, -400.0, 0.0])
    r = knee_axial_reaction(assembly, q_h, f_inter, np.zeros(len(muscles)), muscles, "l")
    assert r == pytest.approx(-400.0 * np.cos(0.6), rel=1e-12)
