"""Modal identification from simulated records and empirical frequency response."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal
from scipy.linalg import expm


class ModalError(ValueError):
    pass


@dataclass(frozen=True)
class ModalSet:
    """Natural frequencies [rad/s] and damping ratios of the two flexible modes."""

    omega1: float
    xi1: float
    omega2: float
    xi2: float

    def __post_init__(self):
        for name in ("omega1", "omega2", "xi1", "xi2"):
            if not math.isfinite(getattr(self, name)):
                raise ModalError(f"{name} must be finite")
        if not (0.0 < self.omega1 < self.omega2):
            raise ModalError(f"need 0 < omega1 < omega2, got {self.omega1}, {self.omega2}")
        for xi in (self.xi1, self.xi2):
            if not (0.0 <= xi < 1.0):
                raise ModalError(f"damping ratio must lie in [0, 1), got {xi}")

    def modes(self) -> list[tuple[float, float]]:
        return [(self.omega1, self.xi1), (self.omega2, self.xi2)]

    def scaled(self, factor: float) -> "ModalSet":
        return ModalSet(self.omega1 * factor, self.xi1, self.omega2 * factor, self.xi2)

    def to_json(self) -> str:
        return json.dumps({"schema": "modalset/1", **asdict(self)}, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ModalSet":
        return cls(float(d["omega1"]), float(d.get("xi1", 0.0)), float(d["omega2"]), float(d.get("xi2", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "ModalSet":
        return cls.from_dict(json.loads(text))


NOMINAL_MODES = ModalSet(2.58, 0.0, 3.55, 0.0)


# --------------------------------------------------------------------------
# spectral peak picking
# --------------------------------------------------------------------------

ZERO_PAD = 16
PEAK_FLOOR = 0.02  # peaks below this fraction of a spectrum's maximum are ignored
XI_FLOOR = 5e-4  # decay rates below this are indistinguishable from beating
DECAY_FLOOR = 0.05


@dataclass(frozen=True)
class Peak:
    omega: float
    magnitude: float  # relative to the strongest peak of the same signal
    source: int  # index of the signal it came from


def spectrum(x: np.ndarray, dt: float, pad: int = ZERO_PAD) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed, zero-padded amplitude spectrum over rad/s."""
    x = np.asarray(x, dtype=float)
    x = signal.detrend(x, type="linear")
    w = np.hanning(x.size)
    nfft = pad * x.size
    F = np.abs(np.fft.rfft(x * w, nfft))
    om = 2.0 * np.pi * np.fft.rfftfreq(nfft, dt)
    return om, F


def spectral_peaks(x: np.ndarray, dt: float, floor: float = PEAK_FLOOR) -> list[tuple[float, float]]:
    """Local maxima as (omega, relative magnitude), parabolic on log magnitude."""
    om, F = spectrum(x, dt)
    if F.max() <= 0.0:
        return []
    F = F / F.max()
    i = np.flatnonzero((F[1:-1] > F[:-2]) & (F[1:-1] >= F[2:]) & (F[1:-1] > floor)) + 1
    out = []
    dw = om[1] - om[0]
    for k in i:
        a, b, c = np.log(F[k - 1 : k + 2] + 1e-300)
        den = a - 2.0 * b + c
        shift = 0.5 * (a - c) / den if den != 0.0 else 0.0
        mag = math.exp(b - 0.25 * (a - c) * shift)
        out.append((om[k] + shift * dw, mag))
    return out


def _merge(peaks: list[Peak], width: float) -> list[Peak]:
    """Collapse peaks closer than ``width``, keeping the strongest."""
    kept: list[Peak] = []
    for pk in sorted(peaks, key=lambda p: -p.magnitude):
        if all(abs(pk.omega - k.omega) > width for k in kept):
            kept.append(pk)
    return kept


def log_decrement_damping(x: np.ndarray, dt: float, omega: float, other: float | None = None) -> float:
    """Damping ratio from the decay of band-pass filtered oscillation peaks.

    The peak amplitudes are fitted with a straight line in log scale, skipping
    the filter transients at both ends and anything after the mode has faded
    below ``DECAY_FLOOR`` of its largest peak.
    """
    half = 0.5 * omega if other is None else min(0.5 * omega, 0.5 * abs(other - omega))
    lo, hi = (omega - half) / (2.0 * math.pi), (omega + half) / (2.0 * math.pi)
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=1.0 / dt, output="sos")
    y = signal.sosfiltfilt(sos, signal.detrend(np.asarray(x, dtype=float)))
    period = 2.0 * math.pi / omega
    # filter ringing lasts a few multiples of 1/bandwidth
    trim = int(min(4.0 / half, 0.2 * y.size * dt) / dt)
    y = y[trim : y.size - trim]
    idx, _ = signal.find_peaks(y, distance=max(1, int(0.6 * period / dt)))
    idx = idx[y[idx] > 0.0]
    if idx.size:
        # once the mode has decayed, leakage from the neighbour dominates
        low = np.flatnonzero(y[idx] < DECAY_FLOOR * y[idx].max())
        if low.size:
            idx = idx[: low[0]]
    if idx.size < 4:
        raise ModalError("too few oscillation peaks for a decrement estimate; record too short")
    slope = np.polyfit(idx * dt, np.log(y[idx]), 1)[0]
    # peak envelope ~ exp(-xi * omega * t)
    xi = -slope / omega
    if xi < XI_FLOOR:
        return 0.0
    return float(min(xi, 0.99))


def _drop_harmonics(peaks: list[Peak], width: float) -> list[Peak]:
    """Remove peaks sitting at 2x or 3x the frequency of another peak.

    Nutation is quadratic in sway for a balanced belt, so it can show twice
    the sway frequency.  A true mode at an exact integer ratio would be lost
    too; that coincidence is accepted.
    """
    return [
        pk for pk in peaks
        if not any(abs(pk.omega - k * q.omega) <= width for q in peaks for k in (2, 3))
    ]


def identify_modes(sim, min_separation: float | None = None) -> ModalSet:
    """Two dominant modes from a free-decay record of torsion and nutation.

    ``sim`` needs ``t``, ``eps2`` and ``theta2`` arrays on a uniform grid.
    Frequencies come from the strongest spectral peaks of either signal
    (each normalised to its own maximum); damping from the log decrement of
    the signal in which the mode is strongest.
    """
    t = np.asarray(sim.t)
    dt = float(t[1] - t[0])
    T = t[-1] - t[0]
    # three FFT bins: clears the first Hann sidelobes
    width = min_separation if min_separation is not None else 6.0 * math.pi / T
    sigs = [np.asarray(sim.eps2), np.asarray(sim.theta2)]
    peaks = []
    for s, x in enumerate(sigs):
        peaks += [Peak(w, m, s) for w, m in spectral_peaks(x, dt) if w > width]
    top = _merge(_drop_harmonics(peaks, width), width)[:2]
    if len(top) < 2:
        raise ModalError(
            "fewer than two distinguishable spectral peaks; use a longer record or excite both modes"
        )
    top.sort(key=lambda p: p.omega)
    xis = []
    for k, pk in enumerate(top):
        other = top[1 - k].omega
        xis.append(log_decrement_damping(sigs[pk.source], dt, pk.omega, other))
    return ModalSet(float(top[0].omega), xis[0], float(top[1].omega), xis[1])


# --------------------------------------------------------------------------
# linear two-mode surrogate with unit static gain per mode
# --------------------------------------------------------------------------


def _surrogate_matrices(modes: ModalSet):
    A = np.zeros((4, 4))
    B = np.zeros(4)
    for k, (w, xi) in enumerate(modes.modes()):
        i = 2 * k
        A[i, i + 1] = 1.0
        A[i + 1, i] = -w * w
        A[i + 1, i + 1] = -2.0 * xi * w
        B[i + 1] = w * w
    return A, B


@dataclass
class SurrogateOutput:
    t: np.ndarray
    alpha: np.ndarray
    eps2: np.ndarray  # mean of the two mode coordinates
    theta2: np.ndarray  # their difference
    x: np.ndarray  # (N, 4) mode displacements and rates


def surrogate_response(modes: ModalSet, u, Ts: float, x0=None) -> SurrogateOutput:
    """Zero-order-hold response of two decoupled unit-gain modes to ``u``.

    Mode k obeys ``x'' + 2 xi w x' + w^2 x = w^2 u``.  Stands in for the
    plant where only the mode locations matter: zero-vibration conditions do
    not depend on modal residues.
    """
    u = np.asarray(u, dtype=float)
    A, B = _surrogate_matrices(modes)
    E = expm(np.block([[A, B[:, None]], [np.zeros((1, 5))]]) * Ts)
    Ad, Bd = E[:4, :4], E[:4, 4]
    x = np.zeros((u.size, 4))
    x[0] = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float)
    for k in range(1, u.size):
        x[k] = Ad @ x[k - 1] + Bd * u[k - 1]
    y1, y2 = x[:, 0], x[:, 2]
    return SurrogateOutput(np.arange(u.size) * Ts, u, 0.5 * (y1 + y2), y1 - y2, x)


# --------------------------------------------------------------------------
# empirical frequency response of the nonlinear plant
# --------------------------------------------------------------------------

GAIN_CAP = 100.0
SETTLE_TOL = 0.05
GAIN_FLOOR = 1e-3  # gains below this count as zero when judging settling


@dataclass
class FrfCurve:
    omega: np.ndarray
    eps2: np.ndarray  # complex gain eps2 / alpha
    theta2: np.ndarray  # complex gain theta2 / alpha
    capped: np.ndarray  # bool per grid point: some output did not settle

    def peaks(self, which: str = "eps2") -> list[float]:
        """Grid frequencies where the gain magnitude has a local maximum."""
        g = np.abs(getattr(self, which))
        out = []
        for i in range(g.size):
            left = g[i - 1] if i > 0 else -np.inf
            right = g[i + 1] if i + 1 < g.size else -np.inf
            if g[i] > left and g[i] > right and 0 < i < g.size - 1:
                out.append(float(self.omega[i]))
        return out

    def to_csv(self) -> str:
        lines = ["omega,gain_eps2,phase_eps2,gain_theta2,phase_theta2"]
        for w, e, th in zip(self.omega, self.eps2, self.theta2):
            lines.append(
                ",".join(f"{v:.17g}" for v in (w, abs(e), np.angle(e), abs(th), np.angle(th)))
            )
        return "\n".join(lines) + "\n"


def _fit_sine(t: np.ndarray, y: np.ndarray, omega: float) -> complex:
    X = np.column_stack([np.cos(omega * t), np.sin(omega * t), np.ones_like(t), t - t.mean()])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    # y ~ Re(G e^{i w t}) with G = a - i b
    return complex(coef[0], -coef[1])


def frf_point(p, omega: float, amplitude: float = 0.01, dt: float = 0.01, state0=None):
    """Steady-state complex gains of torsion and nutation at one frequency.

    Returns ``(g_eps2, g_theta2, [settled_eps2, settled_theta2])``.

    The sinusoidal motor command is faded in with a raised cosine so the
    free modes stay nearly unexcited; the gain is fitted over two equal
    windows of whole periods and flagged when they disagree.
    """
    from .multibody import simulate, static_equilibrium

    if not (0.0 < omega <= 20.0):
        raise ModalError(f"frequency {omega} rad/s outside (0, 20]")
    period = 2.0 * math.pi / omega
    ramp = max(2.0 * period, 20.0)
    nper = max(2, math.ceil(20.0 / period))
    window = nper * period
    horizon = ramp + 2.0 * window
    steps = int(math.ceil(horizon / dt))
    t = np.arange(steps + 1) * dt
    env = np.where(t < ramp, 0.5 - 0.5 * np.cos(np.pi * np.minimum(t, ramp) / ramp), 1.0)
    alpha = amplitude * env * np.sin(omega * t)
    s0 = state0 if state0 is not None else static_equilibrium(p)
    out = simulate(alpha, s0, p, dt=dt, sample_time=dt, horizon=steps * dt)
    gains = []
    for sig in (out.eps2, out.theta2):
        g = []
        for w0 in (ramp, ramp + window):
            m = (out.t >= w0 - 1e-12) & (out.t <= w0 + window + 1e-12)
            g.append(_fit_sine(out.t[m], sig[m], omega) * 1j / amplitude)
        gains.append(g)
    # alpha = a sin(wt) = Re(-i a e^{iwt}), hence the factor i above
    settled = [abs(g1 - g0) <= SETTLE_TOL * max(abs(g1), GAIN_FLOOR) for g0, g1 in gains]
    return gains[0][1], gains[1][1], settled


def _capped(g: complex, cap: float) -> complex:
    return g / abs(g) * cap if g != 0 else complex(cap)


def compute_frf(p, grid, amplitude: float = 0.01, dt: float = 0.01, cap: float = GAIN_CAP) -> FrfCurve:
    """Empirical gains of torsion and nutation with respect to the motor angle."""
    from .multibody import static_equilibrium

    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0.0):
        raise ModalError("frequency grid must be nonempty and strictly increasing")
    if grid[0] <= 0.0 or grid[-1] > 20.0:
        raise ModalError("frequency grid must lie within (0, 20] rad/s")
    s0 = static_equilibrium(p)
    E, Th, flags = [], [], []
    for w in grid:
        ge, gt, ok = frf_point(p, w, amplitude, dt, s0)
        # a growing response at an undamped resonance has no steady gain
        ge = ge if ok[0] else _capped(ge, cap)
        gt = gt if ok[1] else _capped(gt, cap)
        E.append(ge)
        Th.append(gt)
        flags.append(not all(ok))
    return FrfCurve(grid, np.array(E), np.array(Th), np.array(flags))
