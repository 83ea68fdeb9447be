import numpy as np
import pytest

from exosim import SynthesisError, TrajectoryError, load_trajectory, synthesize_running_gait
from exosim.motion import (GaitAmplitudes, GaitParams, GaitTrajectory,
                           TRAJECTORY_COLUMNS, save_trajectory)

RNG = np.random.default_rng(7)


@pytest.fixture(scope="module")
def gait():
    return synthesize_running_gait(GaitParams())


def test_default_gait_valid(gait):
    assert gait.periodic
    assert gait.cycle_duration == pytest.approx(2.0 / 2.78)
    assert gait.contact_schedule["l"] == ((0.0, 0.3),)
    assert gait.contact_schedule["r"] == ((0.5, 0.8),)


def test_no_double_stance(gait):
    T = gait.cycle_duration
    for t in np.linspace(0, T, 400, endpoint=False):
        cl, cr = gait.contact_flags(t)
        assert not (cl and cr)
    # exactly one stance foot or none at every instant
    assert any(gait.contact_flags(t) == (True, False) for t in np.linspace(0, T, 50))
    assert any(gait.contact_flags(t) == (False, True) for t in np.linspace(0, T, 50))
    assert any(gait.contact_flags(t) == (False, False) for t in np.linspace(0, T, 50))


def test_sample_reproduces_knots(gait):
    for i in [0, 3, 17, len(gait.times) - 2]:
        q, _, _, _ = gait.sample(gait.times[i])
        np.testing.assert_allclose(q, gait.coords[i], atol=1e-12)


def test_linear_coordinate_zero_acceleration():
    # natural cubic splines reproduce linear functions exactly
    times = np.linspace(0.0, 1.0, 11)
    coords = np.zeros((11, len(TRAJECTORY_COLUMNS)))
    coords[:, 0] = 2.0 * times + 0.3
    traj = GaitTrajectory(times, coords, TRAJECTORY_COLUMNS, 1.0,
                          {"l": [(0.0, 0.3)]}, periodic=False)
    for t in np.linspace(0.05, 0.95, 13):
        q, qd, qdd, _ = traj.sample(t)
        assert q[0] == pytest.approx(2.0 * t + 0.3, abs=1e-12)
        assert qd[0] == pytest.approx(2.0, abs=1e-10)
        assert qdd[0] == pytest.approx(0.0, abs=1e-9)


def test_sinusoid_acceleration_oracle():
    # analytic derivative oracle: q = A sin(w t) => qdd = -A w^2 sin(w t)
    A, w = 0.4, 2 * np.pi / 0.8
    times = np.linspace(0.0, 0.8, 161)
    coords = np.zeros((times.size, len(TRAJECTORY_COLUMNS)))
    coords[:, 6] = A * np.sin(w * times)
    coords[-1] = coords[0]
    traj = GaitTrajectory(times, coords, TRAJECTORY_COLUMNS, 0.8,
                          {"l": [(0.0, 0.3)]}, periodic=True)
    ts = np.linspace(0.0, 0.8, 57, endpoint=False)
    qdd = np.array([traj.sample(t)[2][6] for t in ts])
    expect = -A * w * w * np.sin(w * ts)
    scale = A * w * w
    assert np.abs(qdd - expect).max() / scale < 1e-3


def test_flight_phase_ballistic(gait):
    # spline-differentiated pelvis height in flight equals -g to 1e-6
    T = gait.cycle_duration
    iy = TRAJECTORY_COLUMNS.index("root_ty")
    for u in np.linspace(0.31, 0.49, 20):
        _, _, qdd, flags = gait.sample(u * T)
        assert flags == (False, False)
        assert qdd[iy] == pytest.approx(-9.81, abs=1e-6)
    for u in np.linspace(0.81, 0.99, 20):
        _, _, qdd, _ = gait.sample(u * T)
        assert qdd[iy] == pytest.approx(-9.81, abs=1e-6)


def test_periodic_seam(gait):
    T = gait.cycle_duration
    q0, qd0, _, _ = gait.sample(0.0)
    q1, qd1, _, _ = gait.sample(T)
    np.testing.assert_allclose(q0, q1, atol=1e-6)
    np.testing.assert_allclose(qd0, qd1, atol=1e-6)
    # sampling beyond one cycle wraps
    q2 = gait.sample(T + 0.123)[0]
    np.testing.assert_allclose(q2, gait.sample(0.123)[0], atol=1e-9)


def test_zero_amplitudes_standing():
    amp = GaitAmplitudes(**{f: 0.0 for f in GaitAmplitudes.__dataclass_fields__})
    traj = synthesize_running_gait(GaitParams(amplitudes=amp))
    q, qd, qdd, flags = traj.sample(0.37 * traj.cycle_duration)
    assert flags[0] or flags[1]
    np.testing.assert_allclose(qd, 0.0, atol=1e-12)
    np.testing.assert_allclose(qdd, 0.0, atol=1e-10)
    assert q[TRAJECTORY_COLUMNS.index("root_ty")] == pytest.approx(0.90)


def test_bad_stance_fraction():
    with pytest.raises(SynthesisError, match="stance fraction"):
        synthesize_running_gait(GaitParams(stance_fraction=0.6))
    with pytest.raises(SynthesisError):
        synthesize_running_gait(GaitParams(stance_fraction=0.0))


def test_amplitude_exceeds_limits():
    with pytest.raises(SynthesisError, match="exceeds joint limit"):
        synthesize_running_gait(GaitParams(
            amplitudes=GaitAmplitudes(knee_swing=2.5)))


# ----------------------------------------------------------------------
# file round trip

def test_round_trip(tmp_path, gait):
    path = tmp_path / "gait.csv"
    save_trajectory(gait, path)
    back = load_trajectory(path)
    assert back.cycle_duration == gait.cycle_duration
    assert back.contact_schedule == gait.contact_schedule
    assert back.coord_names == gait.coord_names
    for t in np.linspace(0, gait.cycle_duration, 100):
        np.testing.assert_allclose(back.sample(t)[0], gait.sample(t)[0], atol=1e-9)


def test_duplicate_timestamp_rejected(tmp_path, gait):
    path = tmp_path / "gait.csv"
    save_trajectory(gait, path)
    lines = path.read_text().splitlines()
    first_data = next(i for i, ln in enumerate(lines)
                      if ln and not ln.startswith("#") and ln[0].isdigit())
    lines.insert(first_data + 1, lines[first_data])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrajectoryError, match="timestamp"):
        load_trajectory(path)


def test_bad_stance_metadata_rejected(tmp_path, gait):
    path = tmp_path / "gait.csv"
    save_trajectory(gait, path)
    text = path.read_text().replace("# stance_l = 0.0,0.3", "# stance_l = 0.0,1.2")
    path.write_text(text)
    with pytest.raises(TrajectoryError, match="lie in"):
        load_trajectory(path)


def test_malformed_row_reports_line(tmp_path, gait):
    path = tmp_path / "gait.csv"
    save_trajectory(gait, path)
    lines = path.read_text().splitlines()
    first_data = next(i for i, ln in enumerate(lines)
                      if ln and not ln.startswith("#") and ln[0].isdigit())
    lines[first_data] = lines[first_data] + ",0.1"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrajectoryError, match=f"line {first_data + 1}"):
        load_trajectory(path)


def test_missing_file():
    with pytest.raises(OSError):
        load_trajectory("/nonexistent/gait.csv")


def test_nonperiodic_range_error():
    times = np.linspace(0.0, 1.0, 11)
    coords = np.zeros((11, len(TRAJECTORY_COLUMNS)))
    traj = GaitTrajectory(times, coords, TRAJECTORY_COLUMNS, 1.0, {}, periodic=False)
    with pytest.raises(TrajectoryError, match="outside"):
        traj.sample(1.5)
