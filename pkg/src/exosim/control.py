"""Actuation controllers: passive, interference-minimizing, assistance-maximizing.

Both active controllers reduce to small box-constrained least-squares
problems over the 6 actuation forces:

  * interference minimization picks F_A so the actuation torque tracks the
    current spring torque on the exoskeleton joints,
    minimizing ||M_A F_A - M_SE F_S||^2;
  * assistance maximization first solves the underdetermined system
    M_SH F'_S = tau_req for desired spring forces (minimum-norm least
    squares), then picks F_A to oppose the exoskeleton-side torque of those
    desired forces, minimizing ||M_A F_A + M_SE F'_S||^2.

The shared solver is a BVLS-style active-set iteration seeded from the
clamped unconstrained solution and terminated on KKT satisfaction, exact for
these tiny dense problems.  Controllers are stateless: pure functions of the
current configuration's moment arms and forces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_NORM_RCOND = 1e-10


@dataclass(frozen=True)
class ControllerOutput:
    """Actuation forces plus solver diagnostics for one control step."""
    F_A: np.ndarray                     # shape (6,)
    objective_value: float | None       # phi_1 / phi_2, None for passive
    desired_F_S: np.ndarray | None      # shape (12,), assistance controller only
    bound_active: np.ndarray            # shape (6,), bool per actuator


def passive_controller() -> ControllerOutput:
    """Zero actuation: the exoskeleton moves under springs and gravity alone."""
    return ControllerOutput(np.zeros(6), None, None, np.zeros(6, bool))


# ----------------------------------------------------------------------
# solvers

def bounded_least_squares(A, b, lo, hi, tol=1e-11, max_iter=None) -> np.ndarray:
    """Minimize ||A x - b||^2 subject to lo <= x <= hi (active-set BVLS).

    Always feasible; rank-deficient free subproblems fall back to the
    minimum-norm least-squares solution.  Terminates when the KKT conditions
    hold to a scaled tolerance: near-zero gradient components on interior
    coordinates, outward-pointing gradient on bound coordinates.
    """
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float).ravel()
    lo = np.asarray(lo, float).ravel()
    hi = np.asarray(hi, float).ravel()
    m, n = A.shape
    if lo.shape != (n,) or hi.shape != (n,):
        raise ValueError("bound vectors must match the number of columns")
    if np.any(lo > hi):
        raise ValueError("lower bounds must not exceed upper bounds")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix must be finite")
    if max_iter is None:
        max_iter = 20 + 10 * n

    x = np.linalg.lstsq(A, b, rcond=None)[0]
    on_lo = x <= lo
    on_hi = x >= hi
    x = np.clip(x, lo, hi)

    span = np.maximum(np.abs(lo), np.abs(hi))
    span[~np.isfinite(span)] = np.abs(x[~np.isfinite(span)])
    g_scale = max(1.0, float(np.abs(A).max() ** 2 * max(span.max(), 1.0)),
                  float(np.abs(A.T @ b).max()))
    kkt_tol = tol * g_scale

    for _ in range(max_iter):
        free = ~(on_lo | on_hi)
        if free.any():
            rhs = b - A[:, ~free] @ x[~free] if (~free).any() else b
            sol = np.linalg.lstsq(A[:, free], rhs, rcond=None)[0]
            target = x.copy()
            target[free] = sol
            lo_bad = target < lo - kkt_tol * 1e-6
            hi_bad = target > hi + kkt_tol * 1e-6
            if lo_bad.any() or hi_bad.any():
                # step from x toward the free optimum up to the first bound
                d = target - x
                alpha = 1.0
                hit = -1
                hit_hi = False
                for i in np.nonzero(free)[0]:
                    if d[i] > 0 and target[i] > hi[i]:
                        a_i = (hi[i] - x[i]) / d[i]
                        if a_i < alpha:
                            alpha, hit, hit_hi = a_i, i, True
                    elif d[i] < 0 and target[i] < lo[i]:
                        a_i = (lo[i] - x[i]) / d[i]
                        if a_i < alpha:
                            alpha, hit, hit_hi = a_i, i, False
                x = x + max(alpha, 0.0) * d
                if hit >= 0:
                    if hit_hi:
                        x[hit] = hi[hit]
                        on_hi[hit] = True
                    else:
                        x[hit] = lo[hit]
                        on_lo[hit] = True
                continue
            x = np.clip(target, lo, hi)

        # KKT check: release the worst bound coordinate with inward gradient
        g = A.T @ (A @ x - b)
        worst = -1
        worst_viol = kkt_tol
        for i in range(n):
            if on_lo[i] and g[i] < -worst_viol:
                worst, worst_viol = i, -g[i]
            elif on_hi[i] and g[i] > worst_viol:
                worst, worst_viol = i, g[i]
        if worst < 0:
            return x
        on_lo[worst] = False
        on_hi[worst] = False
    return x


def minimum_norm_solve(M, rhs, rcond=MIN_NORM_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution of M x = rhs (SVD, relative cutoff)."""
    return np.linalg.lstsq(np.asarray(M, float), np.asarray(rhs, float), rcond=rcond)[0]


# ----------------------------------------------------------------------
# control schemes

def _bound_flags(x, lo, hi, rel=1e-9):
    span = np.maximum(hi - lo, 1.0)
    return (x <= lo + rel * span) | (x >= hi - rel * span)


def mic_step(M_A, M_SE, F_S, limits) -> ControllerOutput:
    """Interference minimization: actuation torque tracks the spring torque.

    F_A = argmin ||M_A F_A - M_SE F_S||^2 within the symmetric force limits.
    """
    limits = np.broadcast_to(np.asarray(limits, float), (6,)).copy()
    tau_se = np.asarray(M_SE, float) @ np.asarray(F_S, float)
    F_A = bounded_least_squares(M_A, tau_se, -limits, limits)
    r = np.asarray(M_A, float) @ F_A - tau_se
    return ControllerOutput(F_A, float(r @ r), None, _bound_flags(F_A, -limits, limits))


def mac_step(M_SH, M_SE, M_A, tau_req, limits) -> ControllerOutput:
    """Assistance maximization via desired spring forces.

    Solves M_SH F'_S = tau_req for the minimum-norm desired spring forces
    (no limits on F'_S), then F_A = argmin ||M_A F_A + M_SE F'_S||^2 within
    the force limits so the actuation opposes the desired-spring torque on
    the exoskeleton side.
    """
    limits = np.broadcast_to(np.asarray(limits, float), (6,)).copy()
    desired = minimum_norm_solve(M_SH, tau_req)
    tau_se_prime = np.asarray(M_SE, float) @ desired
    F_A = bounded_least_squares(M_A, -tau_se_prime, -limits, limits)
    r = np.asarray(M_A, float) @ F_A + tau_se_prime
    return ControllerOutput(F_A, float(r @ r), desired,
                            _bound_flags(F_A, -limits, limits))
