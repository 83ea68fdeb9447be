"""Minimal rigid-body tree engine: frames, recursive kinematics, Newton-Euler.

The engine decomposes every mechanical joint into elementary frames so that
kinematics and dynamics reduce to a single uniform recursion:

  * ``fixed``     - constant offset (and optional constant rotation),
  * ``revolute``  - one rotational DOF about an axis fixed in the parent frame,
  * ``prismatic`` - one translational DOF along an axis fixed in the parent frame.

A 6-DOF free root becomes three prismatic frames (world axes) followed by
three revolute frames (intrinsic x-y-z sequence); a spherical joint becomes
three revolute frames sharing an anchor. Rigid bodies (mass, diagonal inertia
about the COM, COM offset) attach to frames.

All quantities are resolved in the world frame. The forward pass computes
rotation, position, angular velocity/acceleration and linear velocity/
acceleration for every frame and every body COM; the backward pass is a
world-frame recursive Newton-Euler that supports external point forces and
restriction to a subtree (used to run human-only inverse dynamics on the
combined human+exoskeleton tree).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = np.array([0.0, -9.81, 0.0])

FIXED = 0
REVOLUTE = 1
PRISMATIC = 2


def _cross(a, b):
    # np.cross has high overhead on single 3-vectors; do it by hand
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


@dataclass
class Frame:
    """One elementary transform in the tree (see module docstring)."""
    name: str
    parent: int              # frame index, -1 for the world
    kind: int                # FIXED / REVOLUTE / PRISMATIC
    offset: np.ndarray       # fixed: translation in parent frame
    axis: np.ndarray         # revolute/prismatic: unit axis in parent frame
    dof: int = -1            # global DOF index (kind != FIXED)
    rot: np.ndarray | None = None  # fixed: optional constant rotation


@dataclass
class Body:
    """Rigid body attached to a frame."""
    name: str
    frame: int
    mass: float
    inertia: np.ndarray      # diagonal inertia about COM, in body frame
    com: np.ndarray          # COM offset in body frame
    index: int = -1


class TreeState:
    """Per-frame and per-body world-frame kinematics from one forward pass."""

    __slots__ = ("q", "qd", "qdd", "R", "p", "w", "v", "dw", "a",
                 "axis_w", "body_R", "body_p", "body_w", "body_dw",
                 "com_p", "com_v", "com_a")

    def __init__(self, nf: int, nb: int):
        self.R = np.empty((nf, 3, 3))
        self.p = np.empty((nf, 3))
        self.w = np.empty((nf, 3))
        self.v = np.empty((nf, 3))
        self.dw = np.empty((nf, 3))
        self.a = np.empty((nf, 3))
        self.axis_w = np.empty((nf, 3))
        self.com_p = np.empty((nb, 3))
        self.com_v = np.empty((nb, 3))
        self.com_a = np.empty((nb, 3))


class KinematicTree:
    """A tree of elementary frames with attached rigid bodies."""

    def __init__(self):
        self.frames: list[Frame] = []
        self.bodies: list[Body] = []
        self.ndof = 0
        self._frame_by_name: dict[str, int] = {}
        self._body_by_name: dict[str, int] = {}

    # ------------------------------------------------------------------
    # construction

    def add_fixed(self, parent: int, offset, name: str, rot=None) -> int:
        f = Frame(name, parent, FIXED, np.asarray(offset, float),
                  np.zeros(3), rot=None if rot is None else np.asarray(rot, float))
        return self._append(f)

    def add_revolute(self, parent: int, axis, name: str) -> int:
        axis = np.asarray(axis, float)
        n = np.linalg.norm(axis)
        if not np.isclose(n, 1.0, atol=1e-9):
            raise ValueError(f"joint '{name}': axis must have unit norm, got {n:.6g}")
        f = Frame(name, parent, REVOLUTE, np.zeros(3), axis, dof=self.ndof)
        self.ndof += 1
        return self._append(f)

    def add_prismatic(self, parent: int, axis, name: str) -> int:
        axis = np.asarray(axis, float)
        f = Frame(name, parent, PRISMATIC, np.zeros(3), axis, dof=self.ndof)
        self.ndof += 1
        return self._append(f)

    def add_body(self, frame: int, name: str, mass: float, inertia, com) -> int:
        b = Body(name, frame, float(mass), np.asarray(inertia, float),
                 np.asarray(com, float), index=len(self.bodies))
        self.bodies.append(b)
        self._body_by_name[name] = b.index
        return b.index

    def _append(self, f: Frame) -> int:
        idx = len(self.frames)
        if f.parent >= idx:
            raise ValueError(f"frame '{f.name}': parent must precede child")
        self.frames.append(f)
        self._frame_by_name[f.name] = idx
        return idx

    def body_index(self, name: str) -> int:
        try:
            return self._body_by_name[name]
        except KeyError:
            raise KeyError(f"unknown segment '{name}'") from None

    def body(self, name: str) -> Body:
        return self.bodies[self.body_index(name)]

    # ------------------------------------------------------------------
    # forward pass

    def fk(self, q, qd=None, qdd=None) -> TreeState:
        """Forward kinematics/velocity/acceleration pass.

        ``qd``/``qdd`` default to zero. Gravity is not folded in here; the
        backward pass subtracts it explicitly.
        """
        q = np.asarray(q, float)
        if q.shape != (self.ndof,):
            raise ValueError(
                f"coordinate vector has length {q.size}, expected {self.ndof}")
        if not np.all(np.isfinite(q)):
            raise ValueError("coordinate vector contains non-finite entries")
        qd = np.zeros(self.ndof) if qd is None else np.asarray(qd, float)
        qdd = np.zeros(self.ndof) if qdd is None else np.asarray(qdd, float)
        if qd.shape != (self.ndof,) or qdd.shape != (self.ndof,):
            raise ValueError("velocity/acceleration vectors must match DOF count")

        st = TreeState(len(self.frames), len(self.bodies))
        R, p, w, v, dw, a = st.R, st.p, st.w, st.v, st.dw, st.a
        eye = np.eye(3)
        zero = np.zeros(3)

        for i, f in enumerate(self.frames):
            if f.parent < 0:
                Rp, pp, wp, vp, dwp, ap = eye, zero, zero, zero, zero, zero
            else:
                j = f.parent
                Rp, pp, wp, vp, dwp, ap = R[j], p[j], w[j], v[j], dw[j], a[j]

            if f.kind == FIXED:
                d = Rp @ f.offset
                R[i] = Rp if f.rot is None else Rp @ f.rot
                p[i] = pp + d
                w[i] = wp
                dw[i] = dwp
                v[i] = vp + _cross(wp, d)
                a[i] = ap + _cross(dwp, d) + _cross(wp, _cross(wp, d))
                st.axis_w[i] = zero
            elif f.kind == REVOLUTE:
                ax = Rp @ f.axis
                st.axis_w[i] = ax
                R[i] = Rp @ rotation_about(f.axis, q[f.dof])
                p[i] = pp
                w[i] = wp + ax * qd[f.dof]
                dw[i] = dwp + ax * qdd[f.dof] + _cross(wp, ax) * qd[f.dof]
                v[i] = vp
                a[i] = ap
            else:  # PRISMATIC
                ax = Rp @ f.axis
                st.axis_w[i] = ax
                d = ax * q[f.dof]
                R[i] = Rp
                p[i] = pp + d
                w[i] = wp
                dw[i] = dwp
                v[i] = vp + ax * qd[f.dof] + _cross(wp, d)
                a[i] = (ap + ax * qdd[f.dof] + 2.0 * _cross(wp, ax * qd[f.dof])
                        + _cross(dwp, d) + _cross(wp, _cross(wp, d)))

        for b in self.bodies:
            i = b.frame
            r = R[i] @ b.com
            st.com_p[b.index] = p[i] + r
            st.com_v[b.index] = v[i] + _cross(w[i], r)
            st.com_a[b.index] = a[i] + _cross(dw[i], r) + _cross(w[i], _cross(w[i], r))
        return st

    # ------------------------------------------------------------------
    # geometric queries

    def _path_dofs(self, frame: int) -> list[int]:
        """Frame indices of DOF frames on the root-to-frame path."""
        out = []
        i = frame
        while i >= 0:
            if self.frames[i].kind != FIXED:
                out.append(i)
            i = self.frames[i].parent
        out.reverse()
        return out

    def point_world(self, st: TreeState, body: int, local_point) -> np.ndarray:
        b = self.bodies[body]
        return st.p[b.frame] + st.R[b.frame] @ np.asarray(local_point, float)

    def point_velocity(self, st: TreeState, body: int, local_point) -> np.ndarray:
        b = self.bodies[body]
        i = b.frame
        r = st.R[i] @ np.asarray(local_point, float)
        return st.v[i] + _cross(st.w[i], r)

    def point_jacobian(self, st: TreeState, body: int, local_point) -> np.ndarray:
        """3 x ndof translational Jacobian of a body-fixed point."""
        J = np.zeros((3, self.ndof))
        pt = self.point_world(st, body, local_point)
        for i in self._path_dofs(self.bodies[body].frame):
            f = self.frames[i]
            ax = st.axis_w[i]
            if f.kind == REVOLUTE:
                J[:, f.dof] = _cross(ax, pt - st.p[i])
            else:
                J[:, f.dof] = ax
        return J

    def com_jacobians(self, st: TreeState, body: int):
        """Translational (COM) and rotational Jacobians of a body, 3 x ndof each."""
        b = self.bodies[body]
        Jv = np.zeros((3, self.ndof))
        Jw = np.zeros((3, self.ndof))
        pc = st.com_p[b.index]
        for i in self._path_dofs(b.frame):
            f = self.frames[i]
            ax = st.axis_w[i]
            if f.kind == REVOLUTE:
                Jv[:, f.dof] = _cross(ax, pc - st.p[i])
                Jw[:, f.dof] = ax
            else:
                Jv[:, f.dof] = ax
        return Jv, Jw

    # ------------------------------------------------------------------
    # dynamics

    def rnea(self, st: TreeState, ext_forces=(), bodies=None, gravity=GRAVITY):
        """World-frame recursive Newton-Euler backward pass.

        Parameters
        ----------
        st : TreeState
            Forward pass evaluated with the accelerations to invert.
        ext_forces : iterable of (body_index, world_point, world_force)
            External loads applied to bodies. Gravity is applied implicitly.
        bodies : iterable of body indices or None
            Restrict the pass to a subtree (e.g. human-only inverse dynamics
            on the combined tree). Default: all bodies.

        Returns
        -------
        tau : ndarray, shape (ndof,)
            Generalized forces required at every DOF (zero for DOFs whose
            subtree holds no selected body).
        joint_force : dict frame_index -> world force transmitted from the
            parent side to the subtree rooted at that DOF frame (used for
            intersegmental joint reactions).
        """
        nb = len(self.bodies)
        include = np.zeros(nb, bool)
        if bodies is None:
            include[:] = True
        else:
            include[list(bodies)] = True

        fext = np.zeros((nb, 3))
        next_o = np.zeros((nb, 3))  # external moment about world origin
        for bi, pt, fo in ext_forces:
            fext[bi] += fo
            next_o[bi] += _cross(np.asarray(pt, float), np.asarray(fo, float))

        nf = len(self.frames)
        F = np.zeros((nf, 3))   # accumulated subtree force, per frame
        N = np.zeros((nf, 3))   # accumulated subtree moment about world origin

        for b in self.bodies:
            if not include[b.index]:
                continue
            i = b.frame
            R = st.R[i]
            Iw = R @ (b.inertia[:, None] * R.T)
            w = st.w[i]
            f = b.mass * (st.com_a[b.index] - gravity) - fext[b.index]
            n = Iw @ st.dw[i] + _cross(w, Iw @ w) \
                + _cross(st.com_p[b.index], b.mass * (st.com_a[b.index] - gravity)) \
                - next_o[b.index]
            F[i] += f
            N[i] += n

        tau = np.zeros(self.ndof)
        joint_force: dict[int, np.ndarray] = {}
        for i in range(nf - 1, -1, -1):
            f = self.frames[i]
            if f.kind == REVOLUTE:
                tau[f.dof] = st.axis_w[i] @ (N[i] - _cross(st.p[i], F[i]))
                joint_force[i] = F[i].copy()
            elif f.kind == PRISMATIC:
                tau[f.dof] = st.axis_w[i] @ F[i]
                joint_force[i] = F[i].copy()
            if f.parent >= 0:
                F[f.parent] += F[i]
                N[f.parent] += N[i]
        return tau, joint_force

    def mass_matrix(self, st: TreeState, bodies=None, dofs=None) -> np.ndarray:
        """Joint-space mass matrix from COM Jacobians.

        ``dofs`` selects a sub-block (e.g. the free exoskeleton coordinates);
        ``bodies`` restricts the summed inertia to a subtree.
        """
        sel = range(len(self.bodies)) if bodies is None else bodies
        cols = np.arange(self.ndof) if dofs is None else np.asarray(dofs, int)
        M = np.zeros((cols.size, cols.size))
        for bi in sel:
            b = self.bodies[bi]
            Jv, Jw = self.com_jacobians(st, bi)
            Jv = Jv[:, cols]
            Jw = Jw[:, cols]
            R = st.R[b.frame]
            Iw = R @ (b.inertia[:, None] * R.T)
            M += b.mass * (Jv.T @ Jv) + Jw.T @ (Iw @ Jw)
        return M
