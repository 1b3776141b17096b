"""Discrete input-shaping FIR filters.

A shaper is a sequence of nonnegative amplitudes ``A_1..A_n`` placed on the
uniform grid ``t_i = (i - 1) * Ts``.  Its residual-vibration sensitivity for a
mode (omega, xi) is

    V = exp(-xi*omega*t_n) * sqrt(C^2 + S^2)
    C = sum A_i exp(xi*omega*t_i) cos(omega_d t_i)
    S = sum A_i exp(xi*omega*t_i) sin(omega_d t_i)

with ``omega_d = omega * sqrt(1 - xi^2)``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modal import ModalSet

GAIN_TOL = 1e-12
NONNEG_TOL = 1e-12


class ShaperError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ShaperFir:
    """Immutable FIR shaper: amplitudes ``h`` on a grid of period ``Ts``."""

    h: np.ndarray
    Ts: float = 0.01

    def __post_init__(self):
        h = np.array(self.h, dtype=float).ravel()
        if h.size < 1:
            raise ShaperError("shaper needs at least one amplitude")
        if not np.all(np.isfinite(h)):
            raise ShaperError("non-finite shaper amplitude")
        if not (self.Ts > 0.0 and math.isfinite(self.Ts)):
            raise ShaperError(f"sampling period must be positive, got {self.Ts}")
        if abs(h.sum() - 1.0) > 1e-9:
            raise ShaperError(f"amplitudes must sum to 1 (got {h.sum()!r})")
        if h.min() < -1e-9:
            raise ShaperError(f"negative amplitude {h.min()!r}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "Ts", float(self.Ts))

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.Ts

    @property
    def duration(self) -> float:
        """Time of the last impulse, t_n."""
        return (self.n - 1) * self.Ts

    def h2_norm(self) -> float:
        return float(np.sqrt(self.h @ self.h))

    def __eq__(self, other):
        if not isinstance(other, ShaperFir):
            return NotImplemented
        return self.Ts == other.Ts and np.array_equal(self.h, other.h)

    __hash__ = None


def identity(Ts: float = 0.01) -> ShaperFir:
    return ShaperFir(np.ones(1), Ts)


def sensitivity(sh: ShaperFir, omega: float, xi: float = 0.0) -> float:
    """Relative residual vibration V(omega, xi) left by the shaper."""
    if omega <= 0.0 or not (0.0 <= xi < 1.0):
        raise ShaperError(f"need omega > 0 and 0 <= xi < 1, got ({omega}, {xi})")
    t = sh.times
    wd = omega * math.sqrt(1.0 - xi * xi)
    # exp(xi*w*(t_i - t_n)) keeps the weights bounded for long shapers
    w = sh.h * np.exp(xi * omega * (t - sh.duration))
    C = w @ np.cos(wd * t)
    S = w @ np.sin(wd * t)
    return float(math.hypot(C, S))


@dataclass(frozen=True)
class ConstraintSystem:
    """Equality rows for both modes plus unity gain, and -I h <= 0."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    Ts: float

    @property
    def n(self) -> int:
        return self.A_eq.shape[1]

    @property
    def A_ub(self) -> np.ndarray:
        return -np.eye(self.n)

    @property
    def b_ub(self) -> np.ndarray:
        return np.zeros(self.n)


def mode_rows(omega: float, xi: float, t: np.ndarray, derivative: bool = True) -> np.ndarray:
    """Rows c, s (and c_d, s_d) of one mode on the time grid ``t``."""
    wd = omega * math.sqrt(1.0 - xi * xi)
    g = np.exp(xi * omega * t)
    c = g * np.cos(wd * t)
    s = g * np.sin(wd * t)
    if not derivative:
        return np.vstack([c, s])
    return np.vstack([c, s, t * c, t * s])


def build_constraints(modes, n: int, Ts: float, derivative: bool = True) -> ConstraintSystem:
    """Equality rows for an n-tap shaper: four per mode, then unity gain.

    For a ModalSet that is the nine-row system.  ``modes`` may also be any
    sequence of (omega, xi) pairs.  ``derivative=False`` drops the flatness
    rows, leaving plain zero-vibration conditions.
    """
    if n < 1 or Ts <= 0.0:
        raise ShaperError(f"need n >= 1 and Ts > 0, got n={n}, Ts={Ts}")
    pairs = modes.modes() if isinstance(modes, ModalSet) else [(float(w), float(x)) for w, x in modes]
    t = np.arange(n) * Ts
    rows = [mode_rows(w, x, t, derivative) for w, x in pairs]
    A = np.vstack(rows + [np.ones((1, n))])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    return ConstraintSystem(A, b, float(Ts))


class ShaperRuntime:
    """Streaming FIR evaluation, one instance per command stream.

    The history buffer starts filled with ``initial`` (zero by default),
    i.e. the stream is assumed to have rested there forever.
    """

    def __init__(self, sh: ShaperFir, initial: float = 0.0):
        self.shaper = sh
        self._h = sh.h
        self._buf = np.full(sh.n, float(initial))

    def push(self, u: float) -> float:
        buf = self._buf
        buf[1:] = buf[:-1]
        buf[0] = u
        return float(self._h @ buf)

    def reset(self, value: float = 0.0) -> None:
        self._buf.fill(value)


def convolve(sh: ShaperFir, u, Ts: float | None = None, initial: float = 0.0) -> np.ndarray:
    """y(k) = sum_i A_i u(k - i + 1); same length as ``u``.

    Samples before the start are taken equal to ``initial`` (zero-prefix by
    default).  Passing the input's sampling period checks it against the
    shaper's.
    """
    if Ts is not None and not math.isclose(Ts, sh.Ts, rel_tol=1e-9, abs_tol=0.0):
        raise ShaperError(f"input sampled at {Ts} s, shaper at {sh.Ts} s")
    rt = ShaperRuntime(sh, initial)
    return np.array([rt.push(x) for x in np.asarray(u, dtype=float)])


# --------------------------------------------------------------------------
# coefficient files
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_xml(sh: ShaperFir) -> str:
    root = ET.Element("shaper", Ts=_fmt(sh.Ts), n=str(sh.n))
    for i, a in enumerate(sh.h, start=1):
        ET.SubElement(root, "coef", i=str(i)).text = _fmt(a)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def from_xml(text: str) -> ShaperFir:
    root = ET.fromstring(text)
    if root.tag != "shaper":
        raise ShaperError(f"unexpected root element <{root.tag}>")
    n = int(root.attrib["n"])
    coefs = sorted(((int(c.attrib["i"]), float(c.text)) for c in root.iter("coef")))
    if [i for i, _ in coefs] != list(range(1, n + 1)):
        raise ShaperError("coefficient indices must run 1..n without gaps")
    return ShaperFir(np.array([v for _, v in coefs]), float(root.attrib["Ts"]))


def to_json(sh: ShaperFir) -> str:
    return json.dumps({"Ts": sh.Ts, "n": sh.n, "h": [float(a) for a in sh.h]}, indent=1) + "\n"


def from_json(text: str) -> ShaperFir:
    d = json.loads(text)
    h = np.array(d["h"], dtype=float)
    if "n" in d and int(d["n"]) != h.size:
        raise ShaperError("length field disagrees with coefficient count")
    return ShaperFir(h, float(d["Ts"]))


def save(sh: ShaperFir, path: str | Path) -> None:
    path = Path(path)
    text = to_json(sh) if path.suffix.lower() == ".json" else to_xml(sh)
    _atomic_write(path, text)


def load(path: str | Path) -> ShaperFir:
    path = Path(path)
    text = path.read_text()
    return from_json(text) if path.suffix.lower() == ".json" else from_xml(text)
