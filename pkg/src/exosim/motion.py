"""Prescribed gait motion: loading, sampling, and synthetic running gait.

Trajectories are time-stamped samples of the 16 human coordinates plus a
per-foot contact schedule.  Sampling interpolates with cubic splines
(periodic end conditions for periodic trajectories, natural otherwise) and
differentiates the spline analytically for velocities and accelerations.

The synthetic running gait replaces unavailable capture data.  Its pelvis
height is constructed as a C2 piecewise-cubic bounce whose flight sections
are exact free-fall parabolas; because every polynomial breakpoint is a
sample knot, the periodic cubic-spline interpolant reproduces the function
exactly and the sampled vertical acceleration in flight equals -g to
round-off.  The cycle starts at left-foot impact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import SynthesisError, TrajectoryError

G = 9.81

TRAJECTORY_COLUMNS = (
    "root_tx", "root_ty", "root_tz", "root_rx", "root_ry", "root_rz",
    "hip_flexion_l", "hip_adduction_l", "hip_rotation_l", "knee_angle_l", "ankle_angle_l",
    "hip_flexion_r", "hip_adduction_r", "hip_rotation_r", "knee_angle_r", "ankle_angle_r",
)


class GaitTrajectory:
    """Time-parameterized joint coordinates with a per-foot contact schedule.

    Immutable after construction; sampling is pure and reentrant.
    """

    def __init__(self, times, coords, coord_names, cycle_duration,
                 contact_schedule, periodic=True):
        times = np.asarray(times, float)
        coords = np.asarray(coords, float)
        if coords.ndim != 2 or coords.shape[0] != times.size:
            raise TrajectoryError("coordinate array must be (n_samples, n_coords)")
        if coords.shape[1] != len(coord_names):
            raise TrajectoryError(
                f"{coords.shape[1]} coordinate columns for {len(coord_names)} names")
        dt = np.diff(times)
        if times.size < 4:
            raise TrajectoryError("need at least 4 samples for cubic interpolation")
        if np.any(dt <= 0):
            bad = int(np.argmax(dt <= 0))
            raise TrajectoryError(
                f"timestamps must be strictly increasing (sample {bad + 1})")
        if not cycle_duration > 0:
            raise TrajectoryError("cycle_duration must be positive")
        for foot in ("l", "r"):
            for a, b in contact_schedule.get(foot, ()):
                if not (0.0 <= a < b <= 1.0):
                    raise TrajectoryError(
                        f"stance interval ({a}, {b}) for foot '{foot}' must lie in [0, 1]")
            ivs = sorted(contact_schedule.get(foot, ()))
            for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
                if a2 < b1:
                    raise TrajectoryError(
                        f"overlapping stance intervals for foot '{foot}'")
        # running: never both feet down (walking double stance is unsupported)
        for a1, b1 in contact_schedule.get("l", ()):
            for a2, b2 in contact_schedule.get("r", ()):
                if a1 < b2 and a2 < b1:
                    raise TrajectoryError(
                        "left and right stance intervals overlap (double stance)")
        if periodic and not np.allclose(coords[0], coords[-1], atol=1e-9):
            raise TrajectoryError(
                "periodic trajectory must repeat its first sample at the end")

        self.times = times
        self.coords = coords
        self.coord_names = tuple(coord_names)
        self.cycle_duration = float(cycle_duration)
        self.contact_schedule = {f: tuple(tuple(iv) for iv in contact_schedule.get(f, ()))
                                 for f in ("l", "r")}
        self.periodic = bool(periodic)
        if periodic:
            y = coords.copy()
            y[-1] = y[0]
            self._spline = CubicSpline(times, y, axis=0, bc_type="periodic")
        else:
            self._spline = CubicSpline(times, coords, axis=0, bc_type="natural")
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)

    @property
    def n_coords(self) -> int:
        return len(self.coord_names)

    def gait_fraction(self, t: float) -> float:
        return (t % self.cycle_duration) / self.cycle_duration

    def contact_flags(self, t: float) -> tuple[bool, bool]:
        u = self.gait_fraction(t)
        out = []
        for foot in ("l", "r"):
            out.append(any(a <= u < b for a, b in self.contact_schedule[foot]))
        return bool(out[0]), bool(out[1])

    def sample(self, t: float):
        """Coordinates, velocities, accelerations and contact flags at time t."""
        if self.periodic:
            tt = self.times[0] + (t - self.times[0]) % (self.times[-1] - self.times[0])
        else:
            if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
                raise TrajectoryError(
                    f"time {t} outside non-periodic trajectory range "
                    f"[{self.times[0]}, {self.times[-1]}]")
            tt = min(max(t, self.times[0]), self.times[-1])
        q = self._spline(tt)
        qd = self._d1(tt)
        qdd = self._d2(tt)
        return q, qd, qdd, self.contact_flags(t)


# ----------------------------------------------------------------------
# file format

def save_trajectory(traj: GaitTrajectory, path) -> None:
    """Write the trajectory CSV (metadata block, header, units row, samples)."""
    with open(path, "w") as fh:
        fh.write("# exosim gait trajectory\n")
        fh.write(f"# cycle_duration = {float(traj.cycle_duration)!r}\n")
        fh.write(f"# periodic = {'true' if traj.periodic else 'false'}\n")
        for foot in ("l", "r"):
            ivs = ";".join(f"{float(a)!r},{float(b)!r}"
                           for a, b in traj.contact_schedule[foot])
            fh.write(f"# stance_{foot} = {ivs}\n")
        fh.write("time," + ",".join(traj.coord_names) + ",contact_l,contact_r\n")
        units = ["s"] + ["m" if n.startswith("root_t") else "rad"
                         for n in traj.coord_names] + ["flag", "flag"]
        fh.write("# units: " + ",".join(units) + "\n")
        for t, row in zip(traj.times, traj.coords):
            cl, cr = traj.contact_flags(t)
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{float(t)!r},{vals},{int(cl)},{int(cr)}\n")


def _parse_metadata(lines):
    meta = {}
    for ln, line in lines:
        body = line.lstrip("#").strip()
        if "=" in body:
            key, _, val = body.partition("=")
            meta[key.strip()] = val.strip()
    return meta


def load_trajectory(path) -> GaitTrajectory:
    """Read a trajectory CSV written by :func:`save_trajectory` (or by hand)."""
    meta_lines = []
    header = None
    rows = []
    row_lines = []
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta_lines.append((ln, line))
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise TrajectoryError(
                    f"{path}: line {ln}: expected {len(header)} fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as e:
                raise TrajectoryError(f"{path}: line {ln}: {e}") from None
            row_lines.append(ln)
    if header is None or not rows:
        raise TrajectoryError(f"{path}: no data rows found")
    if header[0] != "time" or header[-2:] != ["contact_l", "contact_r"]:
        raise TrajectoryError(
            f"{path}: header must be 'time,<coords...>,contact_l,contact_r'")

    meta = _parse_metadata(meta_lines)
    try:
        cycle_duration = float(meta["cycle_duration"])
    except KeyError:
        raise TrajectoryError(f"{path}: missing 'cycle_duration' metadata") from None
    periodic = meta.get("periodic", "true").lower() in ("true", "1", "yes")

    schedule = {}
    for foot in ("l", "r"):
        ivs = []
        raw = meta.get(f"stance_{foot}", "")
        if raw:
            for chunk in raw.split(";"):
                a, _, b = chunk.partition(",")
                try:
                    ivs.append((float(a), float(b)))
                except ValueError:
                    raise TrajectoryError(
                        f"{path}: bad stance interval '{chunk}' for foot '{foot}'") from None
        schedule[foot] = ivs

    data = np.array(rows)
    times = data[:, 0]
    dup = np.nonzero(np.diff(times) <= 0)[0]
    if dup.size:
        raise TrajectoryError(
            f"{path}: line {row_lines[dup[0] + 1]}: duplicated or decreasing timestamp")
    coords = data[:, 1:-2]
    return GaitTrajectory(times, coords, header[1:-2], cycle_duration,
                          schedule, periodic)


# ----------------------------------------------------------------------
# synthetic running gait

@dataclass(frozen=True)
class GaitAmplitudes:
    """Waveform amplitudes for the synthetic gait (radians / meters).

    These are tunable shape parameters, not subject-specific values.
    """
    hip_flexion: float = 0.42
    hip_offset: float = 0.05
    hip_phase: float = -0.16       # rad; tunes flight-window momentum balance
    hip_adduction: float = 0.06
    hip_rotation: float = 0.0
    knee_offset: float = 0.15
    knee_stance: float = 0.45
    knee_swing: float = 1.25
    ankle: float = 0.15
    pelvis_sway: float = 0.012
    pelvis_fore_aft: float = 0.015

    def all_zero(self) -> bool:
        return all(getattr(self, f.name) == 0.0
                   for f in fields(self) if f.name != "hip_phase")


@dataclass(frozen=True)
class GaitParams:
    """Synthesis parameters: speed, cadence, stance fraction, amplitudes."""
    speed: float = 3.96            # m/s, forward running speed (treadmill frame)
    cadence: float = 2.78          # steps per second; cycle = 2 / cadence
    stance_fraction: float = 0.3   # per-foot stance fraction of the cycle
    standing_height: float = 0.90  # pelvis height at touchdown
    amplitudes: GaitAmplitudes = field(default_factory=GaitAmplitudes)
    samples_per_cycle: int = 120

    @property
    def cycle_duration(self) -> float:
        return 2.0 / self.cadence


def _bump(u):
    """C1 raised-cosine bump on [0, 1], zero outside."""
    u = np.asarray(u, float)
    return np.where((u >= 0) & (u <= 1), 0.5 * (1 - np.cos(2 * np.pi * np.clip(u, 0, 1))), 0.0)


def synthesize_running_gait(params: GaitParams | None = None) -> GaitTrajectory:
    """Generate a smooth periodic running trajectory with a contact schedule.

    Left stance occupies [0, s] of the cycle and right stance [0.5, 0.5+s];
    the pelvis is ballistic (vertical acceleration exactly -g) during both
    flight phases.  All-zero amplitudes produce a static standing trajectory
    supported on the left foot with contact on over the whole cycle.
    """
    p = params or GaitParams()
    if not 0.0 < p.stance_fraction <= 0.5:
        raise SynthesisError(
            f"stance fraction must be in (0, 0.5] for running, got {p.stance_fraction}")
    if p.cadence <= 0 or p.speed < 0:
        raise SynthesisError("cadence must be positive and speed non-negative")
    T = p.cycle_duration
    amp = p.amplitudes

    if amp.all_zero():
        times = np.linspace(0.0, T, 9)
        coords = np.zeros((times.size, len(TRAJECTORY_COLUMNS)))
        coords[:, TRAJECTORY_COLUMNS.index("root_ty")] = p.standing_height
        return GaitTrajectory(times, coords, TRAJECTORY_COLUMNS, T,
                              {"l": [(0.0, 1.0)], "r": []}, periodic=True)

    # joint-limit feasibility (against the default limits)
    checks = (("hip flexion", abs(amp.hip_offset) + abs(amp.hip_flexion), 2.1),
              ("hip adduction", abs(amp.hip_adduction), 0.9),
              ("knee flexion", abs(amp.knee_offset) + abs(amp.knee_stance)
               + abs(amp.knee_swing), 2.3),
              ("ankle", abs(amp.ankle), 1.0))
    for name, reach, lim in checks:
        if reach > lim:
            raise SynthesisError(f"{name} amplitude {reach:.3g} exceeds joint limit {lim}")

    H = T / 2.0
    t_s = p.stance_fraction * T
    t_m = t_s / 2.0
    t_f = H - t_s
    v_land = -G * t_f / 2.0
    a3 = (G * t_m - v_land) / (3.0 * t_m ** 2)
    y0 = p.standing_height

    def c1(tau):
        return y0 + v_land * tau - 0.5 * G * tau ** 2 + a3 * tau ** 3

    def pelvis_y(t):
        tau = t % H
        if tau <= t_m:
            return c1(tau)
        if tau <= t_s:
            return c1(t_s - tau)
        return y0 - v_land * (tau - t_s) - 0.5 * G * (tau - t_s) ** 2

    # knots: uniform grid plus every polynomial breakpoint of the bounce
    base = np.linspace(0.0, T, max(24, p.samples_per_cycle) + 1)
    breaks = np.array([0.0, t_m, t_s, H, H + t_m, H + t_s, T])
    times = np.unique(np.concatenate([base, breaks]))
    keep = np.concatenate([[True], np.diff(times) > 1e-12 * T])
    times = times[keep]

    n = times.size
    cols = {name: np.zeros(n) for name in TRAJECTORY_COLUMNS}
    two_pi_t = 2 * np.pi * times / T

    cols["root_ty"] = np.array([pelvis_y(t) for t in times])
    psi = np.pi * (1.0 - 2.0 * p.stance_fraction)
    cols["root_tx"] = amp.pelvis_fore_aft * np.sin(2 * two_pi_t + psi)
    cols["root_tz"] = amp.pelvis_sway * np.sin(two_pi_t)

    ph = amp.hip_phase
    cols["hip_flexion_l"] = amp.hip_offset + amp.hip_flexion * np.cos(two_pi_t + ph)
    cols["hip_flexion_r"] = amp.hip_offset + amp.hip_flexion * np.cos(two_pi_t + ph - np.pi)
    cols["hip_adduction_l"] = amp.hip_adduction * np.sin(two_pi_t)
    cols["hip_adduction_r"] = amp.hip_adduction * np.sin(two_pi_t - np.pi)
    cols["hip_rotation_l"] = amp.hip_rotation * np.sin(two_pi_t)
    cols["hip_rotation_r"] = amp.hip_rotation * np.sin(two_pi_t - np.pi)

    for side, shift in (("l", 0.0), ("r", H)):
        tt = (times - shift) % T
        u_st = tt / t_s
        # swing-knee flexion bump confined to the contralateral stance window:
        # both flight phases then see a frozen knee, which keeps the predicted
        # GRF impulse consistent with whole-body momentum over the cycle
        u_sw = (tt - H) / t_s
        knee = -(amp.knee_offset + amp.knee_stance * _bump(u_st)
                 + amp.knee_swing * _bump(u_sw))
        ankle = -amp.ankle * np.where((u_st >= 0) & (u_st <= 1),
                                      np.sin(2 * np.pi * np.clip(u_st, 0, 1)), 0.0)
        cols[f"knee_angle_{side}"] = knee
        cols[f"ankle_angle_{side}"] = ankle

    coords = np.column_stack([cols[name] for name in TRAJECTORY_COLUMNS])
    coords[-1] = coords[0]  # exact periodic seam

    schedule = {"l": [(0.0, p.stance_fraction)],
                "r": [(0.5, 0.5 + p.stance_fraction)]}
    return GaitTrajectory(times, coords, TRAJECTORY_COLUMNS, T, schedule, periodic=True)
