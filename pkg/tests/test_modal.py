import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

import oracles
from flyingbelt import modal
from flyingbelt import multibody as mb
from flyingbelt.modal import ModalError, ModalSet
from flyingbelt.plant import NOMINAL_PLANT


def record(t, eps2, theta2):
    return SimpleNamespace(t=t, eps2=eps2, theta2=theta2)


T = np.arange(0.0, 60.0, 0.01)


def tone(w, xi=0.0, a=1.0, phase=0.0):
    wd = w * math.sqrt(1 - xi * xi)
    return a * np.exp(-xi * w * T) * np.cos(wd * T + phase)


def test_modalset_validation_and_json():
    with pytest.raises(ModalError):
        ModalSet(3.0, 0.0, 2.0, 0.0)
    with pytest.raises(ModalError):
        ModalSet(1.0, 1.0, 2.0, 0.0)
    with pytest.raises(ModalError):
        ModalSet(0.0, 0.0, 2.0, 0.0)
    m = ModalSet(2.58, 0.01, 3.55, 0.02)
    d = json.loads(m.to_json())
    assert d["schema"] == "modalset/1"
    assert ModalSet.from_json(m.to_json()) == m


def test_two_tone_frequencies():
    rec = record(T, tone(2.58) + 0.6 * tone(3.55, phase=1.0), 0.3 * tone(3.55) + 0.1 * tone(2.58))
    m = modal.identify_modes(rec)
    assert m.omega1 == pytest.approx(2.58, rel=5e-3)
    assert m.omega2 == pytest.approx(3.55, rel=5e-3)
    assert m.xi1 == 0.0 and m.xi2 == 0.0


@pytest.mark.parametrize("w", [2.58, 3.55])
def test_damped_tone_ratio(w):
    x = tone(w, xi=0.05)
    assert modal.log_decrement_damping(x, 0.01, w) == pytest.approx(0.05, rel=0.1)


def test_damped_pair():
    rec = record(T, tone(2.58, 0.02) + tone(3.55, 0.04), tone(3.55, 0.04) - tone(2.58, 0.02))
    m = modal.identify_modes(rec)
    assert (m.xi1, m.xi2) == pytest.approx((0.02, 0.04), rel=0.1)


def test_needs_two_peaks():
    with pytest.raises(ModalError, match="two"):
        modal.identify_modes(record(T, tone(2.0), tone(2.0)))


def test_harmonics_are_not_modes():
    # a quadratic output shows only twice the frequency
    rec = record(T, tone(3.0) + 0.2 * tone(1.2), tone(1.2) ** 2 + 0.001 * tone(3.0))
    m = modal.identify_modes(rec)
    assert (m.omega1, m.omega2) == pytest.approx((1.2, 3.0), rel=5e-3)


def test_recovers_planted_surrogate_modes():
    planted = ModalSet(1.7, 0.0, 4.1, 0.0)
    u = np.zeros(6000)
    u[0] = 1.0  # one-sample pulse excites both modes
    out = modal.surrogate_response(planted, u, 0.01)
    m = modal.identify_modes(out)
    assert m.omega1 == pytest.approx(1.7, rel=5e-3)
    assert m.omega2 == pytest.approx(4.1, rel=5e-3)


def test_surrogate_matches_ode_oracle():
    modes = ModalSet(2.58, 0.03, 3.55, 0.0)
    Ts = 0.01
    u = np.where(np.arange(400) >= 10, 1.0, 0.0)
    out = modal.surrogate_response(modes, u, Ts)
    t, y = oracles.two_mode_ode(modes.modes(), lambda s: 1.0 if s >= 0.1 - 1e-12 else 0.0, 3.99, Ts)
    ref_eps = 0.5 * (y[0] + y[2])
    assert np.max(np.abs(out.eps2[: t.size] - ref_eps)) < 1e-6


def test_plant_free_decay_matches_analytic_modes(free_decay_record):
    m = modal.identify_modes(free_decay_record)
    drop = -mb.static_equilibrium(NOMINAL_PLANT).q2.z
    # sway: a pendulum whose effective length is close to the drop
    assert m.omega1 == pytest.approx(math.sqrt(NOMINAL_PLANT.gravity / drop), rel=0.01)
    assert m.omega2 == pytest.approx(oracles.trifilar_torsion(NOMINAL_PLANT, drop), rel=5e-3)
    assert m.omega1 == pytest.approx(2.58, rel=0.05)
    assert m.xi1 == 0.0 and m.xi2 == 0.0


def test_frf_static_follow_and_linearity():
    g1, _, ok1 = modal.frf_point(NOMINAL_PLANT, 0.1)
    assert all(ok1) and abs(g1) == pytest.approx(1.0, abs=0.01)
    a, _, _ = modal.frf_point(NOMINAL_PLANT, 1.0, amplitude=0.01)
    b, _, _ = modal.frf_point(NOMINAL_PLANT, 1.0, amplitude=0.02)
    assert abs(abs(b) - abs(a)) / abs(a) < 0.02


@pytest.fixture(scope="module")
def frf():
    return modal.compute_frf(NOMINAL_PLANT, [1.0, 2.3, 2.58, 2.9, 3.3, 3.73, 4.2])


def test_frf_resonances(frf, free_decay_record):
    # undamped: exactly the two grid points next to the modes never settle
    assert list(frf.omega[frf.capped]) == [2.58, 3.73]
    assert frf.peaks("theta2") == [2.58, 3.73]
    ident = modal.identify_modes(free_decay_record)
    for w, w_id in zip(frf.peaks("theta2"), (ident.omega1, ident.omega2)):
        assert w == pytest.approx(w_id, rel=0.03)
    assert np.all(np.isfinite(frf.eps2)) and np.max(np.abs(frf.eps2)) <= modal.GAIN_CAP + 1e-9


def test_frf_csv(frf):
    lines = frf.to_csv().splitlines()
    assert lines[0] == "omega,gain_eps2,phase_eps2,gain_theta2,phase_theta2"
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(vals[:, 0], frf.omega)
    assert np.allclose(vals[:, 1], np.abs(frf.eps2), rtol=1e-15, atol=0)


def test_symmetric_belt_torsion_frf_has_single_peak():
    p = NOMINAL_PLANT.with_(com_offset=0.0)
    frf = modal.compute_frf(p, [2.3, 2.58, 2.9, 3.75, 4.2])
    assert frf.peaks("eps2") == [3.75]
    assert not frf.capped[1]  # no sway resonance without the offset


def test_frf_grid_validation():
    with pytest.raises(ModalError):
        modal.compute_frf(NOMINAL_PLANT, [2.0, 1.0])
    with pytest.raises(ModalError):
        modal.compute_frf(NOMINAL_PLANT, [1.0, 25.0])
