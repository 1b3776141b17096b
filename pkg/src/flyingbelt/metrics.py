"""Residual-oscillation measures of a point-to-point move.

Errors are in degrees.  Torsion error is the belt heading minus where it
should end up (initial heading plus the commanded move); nutation error is
the tilt minus its resting value.  Peak-to-peak and rms are taken over the
residual window, from the end of the commanded motion to the horizon.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .motion import MotionProfile
from .multibody import DEFAULT_DT, SimOutput, SystemState, output_angles, simulate, static_equilibrium
from .plant import PlantParams

SETTLE_BAND_DEG = 2.0
DEFAULT_HORIZON = 12.0


@dataclass
class StrategyMetrics:
    strategy: str
    torsion_pkpk: float
    torsion_rms: float
    nutation_pkpk: float
    nutation_rms: float
    transient_time: float  # last entry into the settling band
    settled: bool
    motion_time: float  # end of the commanded motion
    window_start: float
    horizon: float
    min_tension: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Reference:
    """What the outputs are compared against."""

    eps0: float  # resting torsion at the start
    theta0: float  # resting nutation
    move: float  # commanded change of the motor angle

    def torsion_error(self, eps2) -> np.ndarray:
        return np.degrees(np.asarray(eps2) - self.eps0 - self.move)

    def nutation_error(self, theta2) -> np.ndarray:
        return np.degrees(np.asarray(theta2) - self.theta0)


def settle_time(t, err_deg, band: float = SETTLE_BAND_DEG) -> tuple[float, bool]:
    """First time after which ``|err|`` stays within ``band``."""
    out = np.flatnonzero(np.abs(err_deg) > band)
    if out.size == 0:
        return float(t[0]), True
    if out[-1] == len(t) - 1:
        return float(t[-1]), False
    return float(t[out[-1] + 1]), True


def _pkpk(x) -> float:
    return float(x.max() - x.min()) if x.size else 0.0


def _rms(x) -> float:
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def compute_metrics(
    t, eps2, theta2, ref: Reference, motion_time: float, strategy: str = "", tension=None
) -> StrategyMetrics:
    t = np.asarray(t, dtype=float)
    e = ref.torsion_error(eps2)
    n = ref.nutation_error(theta2)
    # half a step of slack so a motion ending on a sample includes it
    w = t >= motion_time - 0.5 * (t[1] - t[0] if t.size > 1 else 0.0)
    ts, ok = settle_time(t, e)
    tmin = float(np.min(tension)) if tension is not None and np.size(tension) else math.nan
    return StrategyMetrics(
        strategy=strategy,
        torsion_pkpk=_pkpk(e[w]),
        torsion_rms=_rms(e[w]),
        nutation_pkpk=_pkpk(n[w]),
        nutation_rms=_rms(n[w]),
        transient_time=ts,
        settled=ok,
        motion_time=float(motion_time),
        window_start=float(motion_time),
        horizon=float(t[-1]),
        min_tension=tmin,
    )


def reference_for(state0: SystemState, p: PlantParams, move: float) -> Reference:
    eps0, theta0 = output_angles(state0, p)
    return Reference(float(eps0), float(theta0), float(move))


def simulate_profile(
    profile: MotionProfile,
    p: PlantParams,
    state0: SystemState | None = None,
    horizon: float = DEFAULT_HORIZON,
    dt: float = DEFAULT_DT,
) -> SimOutput:
    """Run the plant from rest under ``profile`` (motor angle offset to the state's yaw)."""
    if state0 is None:
        state0 = static_equilibrium(p, profile.start)
    return simulate(profile.alpha, state0, p, dt=dt, sample_time=profile.Ts, horizon=horizon)


def evaluate_profile(
    profile: MotionProfile,
    p: PlantParams,
    state0: SystemState | None = None,
    target: float | None = None,
    horizon: float = DEFAULT_HORIZON,
    dt: float = DEFAULT_DT,
    with_sim: bool = False,
):
    """Simulate a profile and measure the residual oscillation.

    Returns the metrics, or ``(metrics, sim)`` with ``with_sim``.
    """
    if state0 is None:
        state0 = static_equilibrium(p, profile.start)
    target = profile.end if target is None else target
    sim = simulate_profile(profile, p, state0, horizon, dt)
    ref = reference_for(state0, p, target - profile.start)
    m = compute_metrics(sim.t, sim.eps2, sim.theta2, ref, profile.duration, profile.strategy, sim.tension)
    return (m, sim) if with_sim else m
