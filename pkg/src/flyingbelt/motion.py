"""Motion planning for the motor axis and the firmware-style command pipeline.

Four strategies produce a sampled motor angle for a point-to-point move:
a rate-limited ramp, a jerk-limited S-curve, and a step passed through a
time-optimal or an H2-optimal shaper.  ``run_pipeline`` reproduces what the
controller does at 100 Hz: take angle requests, clamp them onto the shortest
path, hold between requests and filter through the shaper.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .shaper import ShaperFir, ShaperRuntime

TWO_PI = 2.0 * math.pi
STRATEGIES = ("const-velocity", "polynomial", "t-opt-shaped", "h2-opt-shaped")

# Jerk-limited defaults for the 180 degree move.  The peak rate matches the
# constant-velocity strategy; acceleration and jerk come from
# scripts/calibrate_poly3.py (5.3 s move, 5.07 deg residual torsion swing).
POLY3_VMAX = math.pi / 3.0
POLY3_JERK_RATIO = 2.9153664783967077  # jmax / amax [1/s]
POLY3_AMAX = 0.5351062487147794
POLY3_JMAX = POLY3_JERK_RATIO * POLY3_AMAX


class MotionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MotionProfile:
    """Motor angle samples on the grid ``t_k = k * Ts``."""

    alpha: np.ndarray
    Ts: float = 0.01
    strategy: str = "raw"

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float).ravel()
        if a.size < 1:
            raise MotionError("profile needs at least one sample")
        if not np.all(np.isfinite(a)):
            raise MotionError("non-finite sample in profile")
        if not self.Ts > 0.0:
            raise MotionError(f"sampling period must be positive, got {self.Ts}")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.alpha.size) * self.Ts

    @property
    def start(self) -> float:
        return float(self.alpha[0])

    @property
    def end(self) -> float:
        return float(self.alpha[-1])

    @property
    def duration(self) -> float:
        """Time of the last sample that differs from the final value."""
        moving = np.flatnonzero(self.alpha != self.alpha[-1])
        return 0.0 if moving.size == 0 else float((moving[-1] + 1) * self.Ts)

    def max_increment(self) -> float:
        return float(np.max(np.abs(np.diff(self.alpha)))) if self.alpha.size > 1 else 0.0

    def __eq__(self, other):
        if not isinstance(other, MotionProfile):
            return NotImplemented
        return self.Ts == other.Ts and np.array_equal(self.alpha, other.alpha)

    __hash__ = None


@dataclass(frozen=True)
class LimiterConfig:
    """Angle limiter of the controller: wrap to the shortest path, optional step quantisation."""

    steps_per_rev: int = 10_000
    quantize: bool = False

    def __post_init__(self):
        if int(self.steps_per_rev) != self.steps_per_rev or self.steps_per_rev <= 0:
            raise MotionError(f"steps_per_rev must be a positive integer, got {self.steps_per_rev}")

    @property
    def step_angle(self) -> float:
        return TWO_PI / self.steps_per_rev

    def apply(self, current: float, requested: float) -> float:
        target = shortest_path_target(current, requested)
        if self.quantize:
            target = round(target / self.step_angle) * self.step_angle
        return target


def shortest_path_target(current: float, requested: float) -> float:
    """Angle equivalent to ``requested`` (mod 2 pi) that is closest to ``current``.

    The move ``delta`` lies in (-pi, pi]; a half turn goes the positive way.
    """
    if not (math.isfinite(current) and math.isfinite(requested)):
        raise MotionError("angles must be finite")
    delta = math.remainder(requested - current, TWO_PI)
    if delta <= -math.pi:
        delta += TWO_PI
    return current + delta


def _ticks(duration: float, Ts: float) -> int:
    # tolerate round-off so that e.g. 3.0 / 0.01 gives exactly 300
    return int(math.ceil(duration / Ts - 1e-9))


def hold_profile(value: float, Ts: float = 0.01, strategy: str = "raw") -> MotionProfile:
    return MotionProfile(np.array([value]), Ts, strategy)


def step_profile(start: float, target: float, Ts: float = 0.01, delay: int = 1) -> MotionProfile:
    """Raw step: ``start`` for ``delay`` samples, then ``target``."""
    if delay < 0:
        raise MotionError("delay must be nonnegative")
    a = np.full(delay + 1, float(target))
    a[:delay] = start
    return MotionProfile(a, Ts, "step")


def const_velocity_profile(start: float, target: float, rate_limit: float, Ts: float = 0.01) -> MotionProfile:
    """Linear ramp at ``rate_limit`` rad/s, landing exactly on ``target``."""
    if not rate_limit > 0.0:
        raise MotionError(f"rate limit must be positive, got {rate_limit}")
    dist = target - start
    if dist == 0.0:
        return hold_profile(start, Ts, "const-velocity")
    k = _ticks(abs(dist) / rate_limit, Ts)
    t = np.arange(k + 1) * Ts
    a = start + math.copysign(rate_limit, dist) * t
    a[-1] = target
    return MotionProfile(a, Ts, "const-velocity")


@dataclass(frozen=True)
class SCurve:
    """Timing of a symmetric seven-phase jerk-limited rest-to-rest move.

    ``Tj`` jerk phase, ``Ta`` acceleration phase (including its two jerk
    phases), ``Tv`` cruise.  ``jerk`` is the jerk actually applied.
    """

    distance: float
    Tj: float
    Ta: float
    Tv: float
    jerk: float

    @property
    def duration(self) -> float:
        return 2.0 * self.Ta + self.Tv

    @property
    def peak_acc(self) -> float:
        return self.jerk * self.Tj

    @property
    def peak_vel(self) -> float:
        return self.peak_acc * (self.Ta - self.Tj)

    def _segments(self):
        Tj, Ta, Tv, j = self.Tj, self.Ta, self.Tv, self.jerk
        Tc = Ta - 2.0 * Tj
        return [(j, Tj), (0.0, Tc), (-j, Tj), (0.0, Tv), (-j, Tj), (0.0, Tc), (j, Tj)]

    def _reach(self) -> float:
        p, v, a = 0.0, 0.0, 0.0
        for j, T in self._segments():
            p, v, a = p + v * T + a * T**2 / 2.0 + j * T**3 / 6.0, v + a * T + j * T**2 / 2.0, a + j * T
        return p

    def evaluate(self, t) -> np.ndarray:
        """Position at times ``t`` (clamped to [0, duration])."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        pos = np.zeros_like(t)
        t0, p, v, a = 0.0, 0.0, 0.0, 0.0
        for j, T in self._segments():
            if T <= 0.0:
                continue
            inside = (t >= t0) & (t <= t0 + T)
            tau = t[inside] - t0
            pos[inside] = p + v * tau + a * tau**2 / 2.0 + j * tau**3 / 6.0
            p, v, a = p + v * T + a * T**2 / 2.0 + j * T**3 / 6.0, v + a * T + j * T**2 / 2.0, a + j * T
            t0 += T
        pos[t >= self.duration] = self.distance
        return pos


def scurve(distance: float, vmax: float, amax: float, jmax: float) -> SCurve:
    """Time-optimal symmetric S-curve for a rest-to-rest move of ``distance`` >= 0."""
    if min(vmax, amax, jmax) <= 0.0:
        raise MotionError("velocity, acceleration and jerk limits must be positive")
    D = float(distance)
    if D < 0.0:
        raise MotionError("distance must be nonnegative")
    if D == 0.0:
        return SCurve(0.0, 0.0, 0.0, 0.0, jmax)
    if vmax * jmax >= amax * amax:
        Tj = amax / jmax
        Ta = Tj + vmax / amax
    else:
        Tj = math.sqrt(vmax / jmax)
        Ta = 2.0 * Tj
    Tv = D / vmax - Ta
    if Tv < 0.0:
        # cruise speed never reached
        Tv = 0.0
        if D >= 2.0 * amax**3 / jmax**2:
            Tj = amax / jmax
            Ta = Tj / 2.0 + math.sqrt((Tj / 2.0) ** 2 + D / amax)
        else:
            Tj = (D / (2.0 * jmax)) ** (1.0 / 3.0)
            Ta = 2.0 * Tj
    # rescale the jerk so the profile lands exactly on D despite round-off
    unit = SCurve(1.0, Tj, Ta, Tv, 1.0)
    reach = unit._reach()
    return SCurve(D, Tj, Ta, Tv, D / reach)


def poly3_profile(
    start: float,
    target: float,
    vmax: float = POLY3_VMAX,
    amax: float = POLY3_AMAX,
    jmax: float = POLY3_JMAX,
    Ts: float = 0.01,
    max_duration: float = 600.0,
) -> MotionProfile:
    """Jerk-limited S-curve: piecewise cubic, C2 continuous, rest to rest."""
    dist = target - start
    if dist == 0.0:
        if min(vmax, amax, jmax) <= 0.0:
            raise MotionError("velocity, acceleration and jerk limits must be positive")
        return hold_profile(start, Ts, "polynomial")
    sc = scurve(abs(dist), vmax, amax, jmax)
    if sc.duration > max_duration:
        raise MotionError(f"move needs {sc.duration:.3g} s, more than the {max_duration} s allowed")
    k = _ticks(sc.duration, Ts)
    a = start + math.copysign(1.0, dist) * sc.evaluate(np.arange(k + 1) * Ts)
    a[-1] = target
    return MotionProfile(a, Ts, "polynomial")


def shaped_profile(raw: MotionProfile, sh: ShaperFir, strategy: str | None = None) -> MotionProfile:
    """Pass ``raw`` through the shaper until the output has settled on its end value.

    The filter history starts at rest on ``raw.start``.
    """
    if not math.isclose(raw.Ts, sh.Ts, rel_tol=1e-9, abs_tol=0.0):
        raise MotionError(f"profile sampled at {raw.Ts} s, shaper at {sh.Ts} s")
    rt = ShaperRuntime(sh, raw.start)
    u = np.concatenate([raw.alpha, np.full(sh.n - 1, raw.end)])
    y = np.array([rt.push(x) for x in u])
    return MotionProfile(y, raw.Ts, strategy or f"{raw.strategy}-shaped")


# --------------------------------------------------------------------------
# firmware-style pipeline
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Update:
    t: float
    angle: float


def run_pipeline(
    updates,
    cfg: LimiterConfig,
    sh: ShaperFir,
    initial: float = 0.0,
    horizon: float | None = None,
) -> MotionProfile:
    """Command stream at the shaper's rate from timestamped angle requests.

    At tick ``k`` every request with timestamp <= k*Ts is clamped onto the
    shortest path from the current target, the latest target is held, and the
    held value is filtered.  Without ``horizon`` the stream runs until the
    last request has passed through the whole filter.
    """
    ups = [u if isinstance(u, Update) else Update(float(u[0]), float(u[1])) for u in updates]
    times = [u.t for u in ups]
    if any(b < a for a, b in zip(times, times[1:])):
        raise MotionError("update timestamps must be nondecreasing")
    if any(not math.isfinite(u.t) or u.t < 0.0 for u in ups):
        raise MotionError("update timestamps must be finite and nonnegative")
    Ts = sh.Ts
    last_tick = _ticks(times[-1], Ts) if ups else 0
    nticks = last_tick + sh.n if horizon is None else _ticks(horizon, Ts) + 1
    rt = ShaperRuntime(sh, initial)
    target = float(initial)
    out = np.empty(nticks)
    i = 0
    for k in range(nticks):
        now = k * Ts
        while i < len(ups) and ups[i].t <= now + 1e-9 * Ts:
            target = cfg.apply(target, ups[i].angle)
            i += 1
        out[k] = rt.push(target)
    return MotionProfile(out, Ts, "pipeline")


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _g(x: float) -> str:
    return f"{x:.17g}"


def save_profile(profile: MotionProfile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "alpha"])
        for t, a in zip(profile.t, profile.alpha):
            w.writerow([_g(t), _g(a)])


def load_profile(path: str | Path, strategy: str = "raw") -> MotionProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MotionError(f"{path}: no samples")
    t = np.array([float(r["t"]) for r in rows])
    a = np.array([float(r["alpha"]) for r in rows])
    Ts = t[1] - t[0] if t.size > 1 else 0.01
    if t.size > 1 and not np.allclose(np.diff(t), Ts, rtol=1e-6, atol=0.0):
        raise MotionError(f"{path}: time grid is not uniform")
    return MotionProfile(a, float(round(Ts, 12)), strategy)


def save_updates(updates, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "angle"])
        for u in updates:
            u = u if isinstance(u, Update) else Update(*u)
            w.writerow([_g(u.t), _g(u.angle)])


def load_updates(path: str | Path) -> list[Update]:
    with open(path, newline="") as fh:
        return [Update(float(r["t"]), float(r["angle"])) for r in csv.DictReader(fh)]
