"""Constrained two-body dynamics of the suspended belt.

Each body carries six absolute coordinates ``[X, Y, Z, roll, pitch, yaw]``
with orientation ``T = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.  The stacked
coordinate vector is ``q = [q1, q2]`` (12 entries).

Constraint rows, in order:

====  =================================================
0-4   body 1 locks: X1, Y1, Z1, roll1, pitch1 at their initial values
5-7   cables A, B, C: ``|r1 - r2| - l = 0``
8     prescribed motor angle: ``yaw1 - alpha(t) = 0``
====  =================================================

Accelerations and multipliers come from the saddle-point system

    [ M   C^T ] [ qdd ]   [ Q     ]
    [ C   0   ] [ lam ] = [ gamma ]

where ``Q`` collects gravity, damping and quadratic-velocity forces and
``gamma = -Cdot @ qd``.  With this sign convention the cable multipliers are
the cable tensions in newtons.  Steps use classical RK4 followed by a
mass-weighted projection of positions and velocities onto the constraint
manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import root

from .plant import PlantError, PlantParams

N_Q = 12
N_LOCK = 5
N_CABLE = 3
N_C = N_LOCK + N_CABLE  # geometric constraints returned by eval_constraints
N_ROWS = N_C + 1  # plus the prescribed motor row
SING_TOL = 1e-6  # |cos(pitch)| below this is a gimbal-lock configuration

DEFAULT_DT = 1e-3
PROJECTION_TOL = 1e-12
PROJECTION_MAXITER = 25


class SimulationError(RuntimeError):
    """Numerical failure inside the integrator (singular KKT, projection stall)."""


# --------------------------------------------------------------------------
# numba kernels; pk packs the scalar parameters (see _pack)
# --------------------------------------------------------------------------

_PK_M1, _PK_M2, _PK_C2, _PK_G = 0, 1, 2, 3
_PK_J1, _PK_J2 = 4, 7
_PK_DT, _PK_DR = 10, 11


@njit(cache=True)
def _rot(a):
    cr, sr = math.cos(a[0]), math.sin(a[0])
    cp, sp = math.cos(a[1]), math.sin(a[1])
    cy, sy = math.cos(a[2]), math.sin(a[2])
    T = np.empty((3, 3))
    T[0, 0] = cy * cp
    T[0, 1] = cy * sp * sr - sy * cr
    T[0, 2] = cy * sp * cr + sy * sr
    T[1, 0] = sy * cp
    T[1, 1] = sy * sp * sr + cy * cr
    T[1, 2] = sy * sp * cr - cy * sr
    T[2, 0] = -sp
    T[2, 1] = cp * sr
    T[2, 2] = cp * cr
    return T


@njit(cache=True)
def _gmat(a):
    # body angular velocity = G @ [roll_dot, pitch_dot, yaw_dot]
    cr, sr = math.cos(a[0]), math.sin(a[0])
    cp, sp = math.cos(a[1]), math.sin(a[1])
    G = np.zeros((3, 3))
    G[0, 0] = 1.0
    G[0, 2] = -sp
    G[1, 1] = cr
    G[1, 2] = cp * sr
    G[2, 1] = -sr
    G[2, 2] = cp * cr
    return G


@njit(cache=True)
def _gdot_rates(a, ad):
    cr, sr = math.cos(a[0]), math.sin(a[0])
    cp, sp = math.cos(a[1]), math.sin(a[1])
    rd, pd, yd = ad[0], ad[1], ad[2]
    out = np.empty(3)
    out[0] = -cp * pd * yd
    out[1] = -sr * rd * pd + (-sp * pd * sr + cp * cr * rd) * yd
    out[2] = -cr * rd * pd + (-sp * pd * cr - cp * sr * rd) * yd
    return out


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _point_jac(T, G, rho):
    """d(point position)/d(body coords) for the point at global offset rho."""
    J = np.zeros((3, 6))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[2, 2] = 1.0
    TG = T @ G
    # -[rho]x @ TG
    for k in range(3):
        col = TG[:, k]
        c = _cross(col, rho)
        J[0, 3 + k] = c[0]
        J[1, 3 + k] = c[1]
        J[2, 3 + k] = c[2]
    return J


@njit(cache=True)
def _point_quad_acc(T, a, ad, rho):
    """Velocity-quadratic part of a body point's acceleration."""
    G = _gmat(a)
    wg = T @ (G @ ad)
    alpha_q = T @ _gdot_rates(a, ad)
    return _cross(alpha_q, rho) + _cross(wg, _cross(wg, rho))


@njit(cache=True)
def _point_pos_vel(q6, qd6, u):
    a = q6[3:6]
    T = _rot(a)
    rho = T @ u
    G = _gmat(a)
    wg = T @ (G @ qd6[3:6])
    return q6[0:3] + rho, qd6[0:3] + _cross(wg, rho), T, rho


@njit(cache=True)
def _body_terms(q6, qd6, m, Jd, ucom, force, torque_g):
    """Mass matrix (6x6) and generalised force (6) of one body."""
    a = q6[3:6]
    ad = qd6[3:6]
    T = _rot(a)
    G = _gmat(a)
    rho = T @ ucom
    Jv = _point_jac(T, G, rho)
    M = np.zeros((6, 6))
    Mv = m * (Jv.T @ Jv)
    Jw = np.zeros((3, 6))
    Jw[:, 3:6] = G
    JJ = np.zeros((3, 6))
    for i in range(3):
        JJ[i, :] = Jd[i] * Jw[i, :]
    M = Mv + Jw.T @ JJ

    wb = G @ ad
    aq = _point_quad_acc(T, a, ad, rho)
    alq = _gdot_rates(a, ad)
    Jwb = Jd * wb
    tau_b = T.T @ torque_g
    Q = Jv.T @ (force - m * aq)
    Q += Jw.T @ (tau_b - Jd * alq - _cross(wb, Jwb))
    return M, Q


@njit(cache=True)
def _mass_force(q, qd, pk):
    M = np.zeros((N_Q, N_Q))
    Q = np.zeros(N_Q)
    g = pk[_PK_G]
    m1, m2 = pk[_PK_M1], pk[_PK_M2]
    zero = np.zeros(3)
    f1 = np.array([0.0, 0.0, -m1 * g])
    M1, Q1 = _body_terms(q[0:6], qd[0:6], m1, pk[_PK_J1:_PK_J1 + 3], zero, f1, zero)

    ucom = np.array([pk[_PK_C2], 0.0, 0.0])
    f2 = np.array([0.0, 0.0, -m2 * g])
    tq = np.zeros(3)
    if pk[_PK_DT] > 0.0 or pk[_PK_DR] > 0.0:
        _, vcom, _, _ = _point_pos_vel(q[6:12], qd[6:12], ucom)
        f2 = f2 - pk[_PK_DT] * vcom
        T1 = _rot(q[3:6])
        T2 = _rot(q[9:12])
        w1 = T1 @ (_gmat(q[3:6]) @ qd[3:6])
        w2 = T2 @ (_gmat(q[9:12]) @ qd[9:12])
        tq = -pk[_PK_DR] * (w2 - w1)
    M2, Q2 = _body_terms(q[6:12], qd[6:12], m2, pk[_PK_J2:_PK_J2 + 3], ucom, f2, tq)
    M[0:6, 0:6] = M1
    M[6:12, 6:12] = M2
    Q[0:6] = Q1
    Q[6:12] = Q2
    return M, Q


@njit(cache=True)
def _constraints(q, lock0, P1, P2, L, alpha):
    c = np.empty(N_ROWS)
    for i in range(3):
        c[i] = q[i] - lock0[i]
    c[3] = q[3] - lock0[3]
    c[4] = q[4] - lock0[4]
    T1 = _rot(q[3:6])
    T2 = _rot(q[9:12])
    for j in range(3):
        d = q[6:9] + T2 @ P2[j] - q[0:3] - T1 @ P1[j]
        c[N_LOCK + j] = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) - L[j]
    c[N_C] = q[5] - alpha
    return c


@njit(cache=True)
def _jacobian(q, P1, P2):
    C = np.zeros((N_ROWS, N_Q))
    for i in range(5):
        C[i, i] = 1.0
    a1, a2 = q[3:6], q[9:12]
    T1, T2 = _rot(a1), _rot(a2)
    G1, G2 = _gmat(a1), _gmat(a2)
    for j in range(3):
        rho1 = T1 @ P1[j]
        rho2 = T2 @ P2[j]
        d = q[6:9] + rho2 - q[0:3] - rho1
        e = d / math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        C[N_LOCK + j, 0:6] = -(e @ _point_jac(T1, G1, rho1))
        C[N_LOCK + j, 6:12] = e @ _point_jac(T2, G2, rho2)
    C[N_C, 5] = 1.0
    return C


@njit(cache=True)
def _gamma(q, qd, P1, P2, alpha_dd):
    gam = np.zeros(N_ROWS)
    for j in range(3):
        r1, v1, T1, rho1 = _point_pos_vel(q[0:6], qd[0:6], P1[j])
        r2, v2, T2, rho2 = _point_pos_vel(q[6:12], qd[6:12], P2[j])
        d = r2 - r1
        dd = v2 - v1
        nd = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        e = d / nd
        aq = _point_quad_acc(T2, q[9:12], qd[9:12], rho2) - _point_quad_acc(
            T1, q[3:6], qd[3:6], rho1
        )
        ed = e[0] * dd[0] + e[1] * dd[1] + e[2] * dd[2]
        dd2 = dd[0] * dd[0] + dd[1] * dd[1] + dd[2] * dd[2]
        gam[N_LOCK + j] = -(e[0] * aq[0] + e[1] * aq[1] + e[2] * aq[2]) - (dd2 - ed * ed) / nd
    gam[N_C] = alpha_dd
    return gam


@njit(cache=True)
def _gimbal_ok(q):
    return abs(math.cos(q[4])) > SING_TOL and abs(math.cos(q[10])) > SING_TOL


@njit(cache=True)
def _accel(q, qd, pk, P1, P2, alpha_dd):
    M, Q = _mass_force(q, qd, pk)
    C = _jacobian(q, P1, P2)
    K = np.zeros((N_Q + N_ROWS, N_Q + N_ROWS))
    K[:N_Q, :N_Q] = M
    K[:N_Q, N_Q:] = C.T
    K[N_Q:, :N_Q] = C
    rhs = np.zeros(N_Q + N_ROWS)
    rhs[:N_Q] = Q
    rhs[N_Q:] = _gamma(q, qd, P1, P2, alpha_dd)
    sol = np.linalg.solve(K, rhs)
    return sol[:N_Q], sol[N_Q:]


@njit(cache=True)
def _project(q, qd, pk, lock0, P1, P2, L, alpha, alpha_d, tol, maxiter):
    """Mass-weighted projection onto c(q)=0 and C(q) qd = b. Returns iterations or -1."""
    M, _ = _mass_force(q, qd, pk)
    Minv = np.linalg.inv(M)
    it = 0
    while True:
        c = _constraints(q, lock0, P1, P2, L, alpha)
        if np.max(np.abs(c)) <= tol:
            break
        if it >= maxiter:
            return q, qd, -1
        C = _jacobian(q, P1, P2)
        MC = Minv @ C.T
        q = q - MC @ np.linalg.solve(C @ MC, c)
        it += 1
    C = _jacobian(q, P1, P2)
    b = np.zeros(N_ROWS)
    b[N_C] = alpha_d
    r = C @ qd - b
    if np.max(np.abs(r)) > 0.0:
        M, _ = _mass_force(q, qd, pk)
        Minv = np.linalg.inv(M)
        MC = Minv @ C.T
        qd = qd - MC @ np.linalg.solve(C @ MC, r)
    return q, qd, it


@njit(cache=True)
def _rk4(q, qd, pk, P1, P2, alpha_dd, h):
    k1v, _ = _accel(q, qd, pk, P1, P2, alpha_dd)
    k1q = qd
    q2 = q + 0.5 * h * k1q
    v2 = qd + 0.5 * h * k1v
    k2v, _ = _accel(q2, v2, pk, P1, P2, alpha_dd)
    q3 = q + 0.5 * h * v2
    v3 = qd + 0.5 * h * k2v
    k3v, _ = _accel(q3, v3, pk, P1, P2, alpha_dd)
    q4 = q + h * v3
    v4 = qd + h * k3v
    k4v, _ = _accel(q4, v4, pk, P1, P2, alpha_dd)
    qn = q + h / 6.0 * (qd + 2.0 * v2 + 2.0 * v3 + v4)
    vn = qd + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return qn, vn


@njit(cache=True)
def _outputs(q, u_buckle):
    # torsion: heading of the buckle seen from the belt centre, so that
    # pendulum sway of the whole belt does not leak into it
    T2 = _rot(q[9:12])
    p = T2 @ u_buckle
    eps = math.atan2(p[1], p[0])
    cz = min(1.0, max(-1.0, T2[2, 2]))
    return eps, math.acos(cz)


@njit(cache=True)
def _wrap(x):
    return x - 2.0 * math.pi * math.floor((x + math.pi) / (2.0 * math.pi))


@njit(cache=True)
def _run(q, qd, pk, lock0, P1, P2, L, u_buckle, knots, substeps, h, tol, maxiter, record_state):
    """Integrate over a first-order-hold motor command.

    ``knots`` are motor angles at spacing ``substeps * h``; between knots the
    motor moves at constant rate, and at every knot the rate change is applied
    as an impulsive velocity projection.  Returns traces at every step.
    """
    nseg = knots.shape[0] - 1
    nout = nseg * substeps + 1
    alpha = np.empty(nout)
    eps = np.empty(nout)
    theta = np.empty(nout)
    tension = np.empty((nout, 3))
    maxres = np.empty(nout)
    motor_err = np.empty(nout)
    nstate = nout if record_state else 1
    qs = np.empty((nstate, N_Q))
    qds = np.empty((nstate, N_Q))
    status = 0
    seg_len = substeps * h

    e0, th0 = _outputs(q, u_buckle)
    eps_prev_raw = e0
    eps_acc = e0
    k = 0
    for s in range(nseg):
        rate = (knots[s + 1] - knots[s]) / seg_len
        if s == 0 or rate != (knots[s] - knots[s - 1]) / seg_len:
            q, qd, it = _project(q, qd, pk, lock0, P1, P2, L, knots[s], rate, tol, maxiter)
            if it < 0:
                return alpha, eps, theta, tension, maxres, motor_err, qs, qds, k, 2
        if s == 0:
            _, lam = _accel(q, qd, pk, P1, P2, 0.0)
            alpha[0] = knots[0]
            eps[0] = e0
            theta[0] = th0
            tension[0] = lam[N_LOCK:N_C]
            c = _constraints(q, lock0, P1, P2, L, knots[0])
            maxres[0] = np.max(np.abs(c[:N_C]))
            motor_err[0] = abs(c[N_C])
            qs[0] = q
            qds[0] = qd
        for j in range(substeps):
            if not _gimbal_ok(q):
                return alpha, eps, theta, tension, maxres, motor_err, qs, qds, k, 1
            q, qd = _rk4(q, qd, pk, P1, P2, 0.0, h)
            a_now = knots[s] + rate * (j + 1) * h
            q, qd, it = _project(q, qd, pk, lock0, P1, P2, L, a_now, rate, tol, maxiter)
            if it < 0:
                return alpha, eps, theta, tension, maxres, motor_err, qs, qds, k, 2
            k += 1
            _, lam = _accel(q, qd, pk, P1, P2, 0.0)
            er, th = _outputs(q, u_buckle)
            eps_acc += _wrap(er - eps_prev_raw)
            eps_prev_raw = er
            alpha[k] = a_now
            eps[k] = eps_acc
            theta[k] = th
            tension[k] = lam[N_LOCK:N_C]
            c = _constraints(q, lock0, P1, P2, L, a_now)
            maxres[k] = np.max(np.abs(c[:N_C]))
            motor_err[k] = abs(c[N_C])
            if record_state:
                qs[k] = q
                qds[k] = qd
    if not record_state:
        qs[0] = q
        qds[0] = qd
    return alpha, eps, theta, tension, maxres, motor_err, qs, qds, k, status


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BodyCoords:
    """Position of the body reference point and its roll/pitch/yaw angles."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw], dtype=float)

    @classmethod
    def from_array(cls, v) -> "BodyCoords":
        return cls(*(float(x) for x in v))

    def rotation(self) -> np.ndarray:
        return _rot(self.as_array()[3:6])

    def zxz_angles(self) -> tuple[float, float, float]:
        """Precession, nutation and spin of the same orientation (zxz sequence).

        At zero nutation only precession + spin is defined; the split
        returned there puts everything into the spin.
        """
        T = self.rotation()
        nut = math.acos(min(1.0, max(-1.0, T[2, 2])))
        if math.sin(nut) < 1e-12:
            return 0.0, nut, math.atan2(T[1, 0], T[0, 0])
        prec = math.atan2(T[0, 2], -T[1, 2])
        spin = math.atan2(T[2, 0], T[2, 1])
        return prec, nut, spin


@dataclass(frozen=True)
class SystemState:
    q1: BodyCoords = field(default_factory=BodyCoords)
    q2: BodyCoords = field(default_factory=BodyCoords)
    qdot1: BodyCoords = field(default_factory=BodyCoords)
    qdot2: BodyCoords = field(default_factory=BodyCoords)

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.q1.as_array(), self.q2.as_array()])

    @property
    def qdot(self) -> np.ndarray:
        return np.concatenate([self.qdot1.as_array(), self.qdot2.as_array()])

    @classmethod
    def from_arrays(cls, q, qd) -> "SystemState":
        q = np.asarray(q, dtype=float)
        qd = np.asarray(qd, dtype=float)
        return cls(
            BodyCoords.from_array(q[:6]),
            BodyCoords.from_array(q[6:]),
            BodyCoords.from_array(qd[:6]),
            BodyCoords.from_array(qd[6:]),
        )


@dataclass(frozen=True)
class DaeWorkspace:
    """Everything assembled for one evaluation of the saddle-point system."""

    mass: np.ndarray
    forces: np.ndarray
    constraints: np.ndarray
    jacobian: np.ndarray
    gamma: np.ndarray
    qddot: np.ndarray
    multipliers: np.ndarray

    @property
    def tensions(self) -> np.ndarray:
        return self.multipliers[N_LOCK:N_C]

    @property
    def compressed_cables(self) -> list[int]:
        return [j for j, t in enumerate(self.tensions) if t < 0.0]


def _pack(p: PlantParams):
    pk = np.array(
        [
            p.mcsu_mass,
            p.belt_mass,
            p.com_offset,
            p.gravity,
            0.01,
            0.01,
            p.mcsu_inertia_zz,
            *p.belt_inertia,
            p.damping_translational,
            p.damping_rotational,
        ]
    )
    return pk, p.arm_points(), p.belt_points(), np.array(p.cable_lengths)


LOCK0 = np.zeros(5)


def level_drop(p: PlantParams) -> float:
    """Vertical drop of the belt centre below the arm plane in the level hang."""
    gap = p.horizontal_gap()
    l = p.cable_lengths
    if max(l) - min(l) > 1e-12:
        raise PlantError("level hang needs equal cable lengths")
    return math.sqrt(l[0] ** 2 - gap * gap)


def build_initial_state(p: PlantParams) -> SystemState:
    """Body 1 at the origin, belt level directly below with x2 along X, at rest."""
    z2 = -level_drop(p)
    return SystemState(BodyCoords(), BodyCoords(z=z2), BodyCoords(), BodyCoords())


def eval_constraints(state: SystemState, p: PlantParams, alpha: float | None = None) -> np.ndarray:
    """The 8 geometric residuals: 5 body-1 locks, then cables A, B, C.

    With ``alpha`` given, the prescribed-motor residual is appended as a 9th entry.
    """
    pk, P1, P2, L = _pack(p)
    c = _constraints(state.q, LOCK0, P1, P2, L, 0.0 if alpha is None else float(alpha))
    return c if alpha is not None else c[:N_C]


def eval_jacobian(state: SystemState, p: PlantParams, motor_row: bool = False) -> np.ndarray:
    _, P1, P2, _ = _pack(p)
    C = _jacobian(state.q, P1, P2)
    return C if motor_row else C[:N_C]


def assemble(state: SystemState, p: PlantParams, alpha: float = 0.0, alpha_ddot: float = 0.0) -> DaeWorkspace:
    pk, P1, P2, L = _pack(p)
    q, qd = state.q, state.qdot
    if not _gimbal_ok(q):
        raise SimulationError(f"gimbal lock: pitch angles {q[4]:.6g}, {q[10]:.6g}")
    M, Q = _mass_force(q, qd, pk)
    C = _jacobian(q, P1, P2)
    gam = _gamma(q, qd, P1, P2, alpha_ddot)
    try:
        qdd, lam = _accel(q, qd, pk, P1, P2, alpha_ddot)
    except Exception as exc:  # numba raises a plain exception on singular solves
        raise SimulationError(f"singular KKT matrix at q={np.array2string(q, precision=4)}") from exc
    return DaeWorkspace(M, Q, _constraints(q, LOCK0, P1, P2, L, alpha)[:N_C], C, gam, qdd, lam)


def energy(state: SystemState, p: PlantParams) -> float:
    """Kinetic plus gravitational potential energy of both bodies."""
    pk, _, _, _ = _pack(p)
    q, qd = state.q, state.qdot
    M, _ = _mass_force(q, qd, pk)
    T2 = _rot(q[9:12])
    zcom = q[8] + T2[2, 0] * p.com_offset
    return 0.5 * qd @ M @ qd + p.gravity * (p.belt_mass * zcom + p.mcsu_mass * q[2])


def step(
    state: SystemState,
    p: PlantParams,
    alpha: float,
    alpha_dot: float,
    alpha_ddot: float,
    dt: float,
    tol: float = PROJECTION_TOL,
) -> SystemState:
    """Advance one RK4 step with ``alpha`` quadratic over the step.

    ``alpha``/``alpha_dot`` are the motor angle and rate at the start of the
    step.  A motor rate differing from the state's is applied as an impulse
    (mass-weighted velocity projection) before integrating.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    pk, P1, P2, L = _pack(p)
    q, qd = state.q, state.qdot
    q, qd, it = _project(q, qd, pk, LOCK0, P1, P2, L, alpha, alpha_dot, tol, PROJECTION_MAXITER)
    if it < 0:
        raise SimulationError("constraint projection did not converge at step start")
    if not _gimbal_ok(q):
        raise SimulationError(f"gimbal lock: pitch angles {q[4]:.6g}, {q[10]:.6g}")
    try:
        q, qd = _rk4(q, qd, pk, P1, P2, alpha_ddot, dt)
    except Exception as exc:
        raise SimulationError("singular KKT matrix during RK4 stage") from exc
    a1 = alpha + alpha_dot * dt + 0.5 * alpha_ddot * dt * dt
    ad1 = alpha_dot + alpha_ddot * dt
    q, qd, it = _project(q, qd, pk, LOCK0, P1, P2, L, a1, ad1, tol, PROJECTION_MAXITER)
    if it < 0:
        raise SimulationError(f"constraint projection did not converge in {PROJECTION_MAXITER} iterations")
    return SystemState.from_arrays(q, qd)


@dataclass
class SimOutput:
    t: np.ndarray
    alpha: np.ndarray
    eps2: np.ndarray
    theta2: np.ndarray
    tension: np.ndarray  # (N, 3) cable A, B, C
    max_residual: np.ndarray
    motor_error: np.ndarray
    q: np.ndarray | None = None
    qdot: np.ndarray | None = None
    final_state: SystemState | None = None
    failed: bool = False
    message: str = ""

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def compression_detected(self) -> bool:
        return bool(np.any(self.tension < 0.0))

    def states(self):
        if self.q is None:
            raise ValueError("run simulate(..., record_state=True) to keep the state trace")
        for q, qd in zip(self.q, self.qdot):
            yield SystemState.from_arrays(q, qd)


def simulate(
    alpha_samples,
    state0: SystemState,
    p: PlantParams,
    dt: float = DEFAULT_DT,
    sample_time: float = 0.01,
    horizon: float | None = None,
    record_state: bool = False,
    tol: float = PROJECTION_TOL,
) -> SimOutput:
    """Drive the plant with motor angles sampled every ``sample_time``.

    The motor moves linearly between samples (first-order hold) and holds the
    last sample after the end of the stream, up to ``horizon`` seconds.
    ``sample_time`` must be an integer multiple of ``dt``.
    """
    knots = np.asarray(alpha_samples, dtype=float).ravel()
    if knots.size == 0:
        raise ValueError("empty motor profile")
    ratio = sample_time / dt
    substeps = int(round(ratio))
    if substeps < 1 or abs(ratio - substeps) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"sample_time {sample_time} is not an integer multiple of dt {dt}")
    nseg = max(knots.size - 1, 1)
    if horizon is not None:
        nseg = max(int(round(horizon / sample_time)), 1)
    if knots.size < nseg + 1:
        knots = np.concatenate([knots, np.full(nseg + 1 - knots.size, knots[-1])])
    knots = knots[: nseg + 1]

    pk, P1, P2, L = _pack(p)
    q0, qd0 = state0.q, state0.qdot
    alpha, eps, theta, tension, maxres, merr, qs, qds, k, status = _run(
        q0, qd0, pk, LOCK0, P1, P2, L, p.buckle_point(), knots, substeps, float(dt), tol,
        PROJECTION_MAXITER, record_state,
    )
    n = k + 1
    t = np.arange(n) * dt
    msg = ""
    if status == 1:
        msg = f"gimbal lock near t={t[-1]:.4f} s"
    elif status == 2:
        msg = f"constraint projection failed near t={t[-1]:.4f} s"
    out = SimOutput(
        t=t,
        alpha=alpha[:n].copy(),
        eps2=eps[:n].copy(),
        theta2=theta[:n].copy(),
        tension=tension[:n].copy(),
        max_residual=maxres[:n].copy(),
        motor_error=merr[:n].copy(),
        q=qs[:n].copy() if record_state else None,
        qdot=qds[:n].copy() if record_state else None,
        final_state=SystemState.from_arrays(qs[n - 1] if record_state else qs[0], qds[n - 1] if record_state else qds[0]),
        failed=status != 0,
        message=msg,
    )
    if status != 0:
        raise SimulationError(msg)
    return out


def static_equilibrium(p: PlantParams, yaw: float = 0.0) -> SystemState:
    """Resting configuration of the belt for a fixed motor angle.

    With a buckle offset the level hang is not in equilibrium: the belt
    shifts and tilts slightly.  Solves stationarity of the constrained
    potential starting from the level hang.
    """
    pk, P1, P2, L = _pack(p)
    start = build_initial_state(p).q
    start[5] = yaw
    start[11] = yaw
    lam0 = np.full(3, p.belt_mass * p.gravity / 3.0)
    q1 = start[:6]

    def residual(x):
        q = np.concatenate([q1, x[:6]])
        _, Q = _mass_force(q, np.zeros(N_Q), pk)
        C = _jacobian(q, P1, P2)
        c = _constraints(q, LOCK0, P1, P2, L, yaw)
        r = np.empty(9)
        r[:6] = Q[6:] - C[N_LOCK:N_C, 6:].T @ x[6:]
        r[6:] = c[N_LOCK:N_C]
        return r

    sol = root(residual, np.concatenate([start[6:], lam0]), method="hybr", tol=1e-14)
    if not sol.success or np.max(np.abs(residual(sol.x))) > 1e-11:
        raise SimulationError(f"static equilibrium search failed: {sol.message}")
    q = np.concatenate([q1, sol.x[:6]])
    return SystemState.from_arrays(q, np.zeros(N_Q))


def output_angles(state: SystemState, p: PlantParams) -> tuple[float, float]:
    """Torsion (azimuth of the buckle point) and nutation of the belt."""
    return _outputs(state.q, p.buckle_point())
