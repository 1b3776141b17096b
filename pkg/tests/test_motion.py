import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flyingbelt import motion, shaper
from flyingbelt.motion import LimiterConfig, MotionError, Update
from flyingbelt.shaper import ShaperFir

PI = math.pi


# ---------------------------------------------------------------- shortest path


def brute_force_target(current, requested):
    # scan the 2 pi copies of the request; ties go to the positive move
    cands = requested + 2 * PI * np.arange(-200, 201)
    d = cands - current
    best = np.min(np.abs(d))
    near = d[np.abs(d) <= best + 1e-9]
    return current + near.max()


def test_shortest_path_examples():
    assert motion.shortest_path_target(0.0, 1.5 * PI) == pytest.approx(-0.5 * PI)
    assert motion.shortest_path_target(0.0, PI) == PI
    assert motion.shortest_path_target(0.0, -PI) == PI
    assert motion.shortest_path_target(PI, 0.0) == 2 * PI
    assert motion.shortest_path_target(10.0, 10.0) == 10.0
    with pytest.raises(MotionError):
        motion.shortest_path_target(0.0, math.nan)


def test_shortest_path_on_dense_grid():
    grid = np.linspace(-20.0, 20.0, 161)
    for c in grid[::4]:
        for r in grid:
            got = motion.shortest_path_target(c, r)
            assert got == pytest.approx(brute_force_target(c, r), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_shortest_path_properties(c, r):
    t = motion.shortest_path_target(c, r)
    delta = t - c
    assert -PI - 1e-9 < delta <= PI + 1e-9
    k = (t - r) / (2 * PI)
    assert abs(k - round(k)) < 1e-9


def test_limiter_quantises_when_asked():
    cfg = LimiterConfig(quantize=True)
    t = cfg.apply(0.0, 0.1234567)
    assert t / cfg.step_angle == pytest.approx(round(t / cfg.step_angle), abs=1e-9)
    assert abs(t - 0.1234567) <= cfg.step_angle / 2
    assert LimiterConfig().apply(0.0, 0.1234567) == 0.1234567
    with pytest.raises(MotionError):
        LimiterConfig(steps_per_rev=0)


# ---------------------------------------------------------------- ramps


def test_constant_velocity_half_turn_takes_three_seconds():
    p = motion.const_velocity_profile(0.0, PI, PI / 3)
    assert p.duration == pytest.approx(3.0, abs=1e-12)
    assert p.end == PI and p.start == 0.0
    assert np.allclose(np.diff(p.alpha)[:-1], PI / 3 * 0.01, rtol=0, atol=1e-14)
    assert p.strategy == "const-velocity"


def test_constant_velocity_edge_cases():
    p = motion.const_velocity_profile(1.0, 1.0, 0.5)
    assert p.alpha.tolist() == [1.0] and p.duration == 0.0
    fast = motion.const_velocity_profile(0.0, -2.0, 2.0)
    slow = motion.const_velocity_profile(0.0, -2.0, 1.0)
    assert slow.duration == pytest.approx(2 * fast.duration)
    assert fast.end == -2.0
    with pytest.raises(MotionError):
        motion.const_velocity_profile(0.0, 1.0, 0.0)


def test_polynomial_half_turn_lasts_calibrated_time():
    p = motion.poly3_profile(0.0, PI)
    assert p.duration == pytest.approx(5.3, abs=0.01)
    assert p.end == PI


def fd_bounds(alpha, Ts):
    v = np.diff(alpha) / Ts
    a = np.diff(alpha, 2) / Ts**2
    j = np.diff(alpha, 3) / Ts**3
    return np.abs(v).max(), np.abs(a).max(), np.abs(j).max()


@pytest.mark.parametrize(
    "dist,vmax,amax,jmax",
    [
        (PI, motion.POLY3_VMAX, motion.POLY3_AMAX, motion.POLY3_JMAX),
        (-PI, motion.POLY3_VMAX, motion.POLY3_AMAX, motion.POLY3_JMAX),
        (0.05, 1.0, 1.0, 1.0),  # pure jerk phases
        (2.0, 10.0, 1.0, 5.0),  # no cruise
        (6.0, 0.5, 4.0, 2.0),  # jerk too slow to reach amax
    ],
)
def test_polynomial_respects_limits(dist, vmax, amax, jmax):
    Ts = 0.01
    p = motion.poly3_profile(0.0, dist, vmax, amax, jmax, Ts)
    v, a, j = fd_bounds(p.alpha, Ts)
    assert v <= vmax * (1 + 1e-6)
    assert a <= amax * (1 + 1e-6)
    assert j <= jmax * (1 + 1e-6)
    assert p.end == dist


def test_polynomial_is_twice_continuously_differentiable():
    sc = motion.scurve(PI, motion.POLY3_VMAX, motion.POLY3_AMAX, motion.POLY3_JMAX)
    h = 1e-4
    t = np.arange(-5 * h, sc.duration + 5 * h, h)
    x = sc.evaluate(t)
    # a jump in acceleration would show as a third difference of order h^2;
    # the allowance on top of the jerk term is the rounding of x itself
    third = np.abs(np.diff(x, 3))
    assert third.max() <= sc.jerk * h**3 + 16 * np.finfo(float).eps * np.abs(x).max()
    assert sc.peak_acc <= motion.POLY3_AMAX * (1 + 1e-12)
    assert sc.peak_vel <= motion.POLY3_VMAX * (1 + 1e-12)


def test_polynomial_edge_cases():
    assert motion.poly3_profile(2.0, 2.0).alpha.tolist() == [2.0]
    with pytest.raises(MotionError, match="allowed"):
        motion.poly3_profile(0.0, 1000.0, 0.1, 1.0, 1.0, max_duration=60.0)
    with pytest.raises(MotionError):
        motion.poly3_profile(0.0, 1.0, -1.0, 1.0, 1.0)


# ---------------------------------------------------------------- shaped steps


def test_time_optimal_command_is_a_staircase(topt_design):
    p = motion.shaped_profile(motion.step_profile(0.0, PI), topt_design.shaper, "t-opt-shaped")
    inc = np.diff(p.alpha)
    assert np.mean(inc == 0.0) >= 0.4  # held between impulses
    assert inc.min() >= 0.0
    assert abs(p.end - PI) < 1e-10 and p.start == 0.0


def test_smoothing_shrinks_the_largest_increment(topt_design, h2_design):
    step = motion.step_profile(0.0, PI)
    a = motion.shaped_profile(step, topt_design.shaper)
    b = motion.shaped_profile(step, h2_design.shaper)
    assert b.max_increment() < a.max_increment()
    assert abs(b.end - PI) < 1e-10


def test_identity_shaper_passes_the_profile_through():
    raw = motion.poly3_profile(0.0, 1.0)
    out = motion.shaped_profile(raw, shaper.identity())
    assert out == raw


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30), st.floats(-5, 5), st.floats(-5, 5))
def test_shaped_monotone_steps_stay_monotone(raw_h, a0, a1):
    h = np.asarray(raw_h) + 1e-3
    sh = ShaperFir(h / h.sum(), 0.01)
    p = motion.shaped_profile(motion.step_profile(a0, a1), sh)
    d = np.diff(p.alpha) * np.sign(a1 - a0 or 1.0)
    assert d.min() >= -1e-12
    assert abs(p.end - a1) < 1e-10


def test_shaped_profile_checks_sampling(topt_design):
    with pytest.raises(MotionError, match="sampled"):
        motion.shaped_profile(motion.step_profile(0.0, 1.0, 0.02), topt_design.shaper)


def test_profile_is_immutable():
    p = motion.step_profile(0.0, 1.0)
    with pytest.raises(ValueError):
        p.alpha[0] = 3.0
    with pytest.raises(MotionError):
        motion.MotionProfile([], 0.01)


# ---------------------------------------------------------------- pipeline


def test_single_update_matches_shaped_step(h2_design):
    sh = h2_design.shaper
    out = motion.run_pipeline([Update(sh.Ts, PI)], LimiterConfig(), sh)
    ref = motion.shaped_profile(motion.step_profile(0.0, PI, sh.Ts, delay=1), sh)
    assert out.alpha.tobytes() == ref.alpha.tobytes()


def test_opposing_updates_superpose(topt_design):
    sh = topt_design.shaper
    ups = [Update(0.5, 1.0), Update(0.8, -0.5)]
    out = motion.run_pipeline(ups, LimiterConfig(), sh)
    k = np.arange(out.alpha.size)
    step1 = np.where(k >= 50, 1.0, 0.0)
    step2 = np.where(k >= 80, -1.5, 0.0)
    expect = shaper.convolve(sh, step1) + shaper.convolve(sh, step2)
    assert np.allclose(out.alpha, expect, rtol=0, atol=1e-12)


def test_spaced_updates_settle_between_requests(h2_design):
    sh = h2_design.shaper
    gap = sh.duration + 0.5
    ups = [Update(0.1, 1.0), Update(0.1 + gap, -1.0), Update(0.1 + 2 * gap, 2.0)]
    out = motion.run_pipeline(ups, LimiterConfig(), sh)
    for u, prev in zip(ups[1:], (1.0, -1.0)):
        k = int(round(u.t / sh.Ts)) - 1
        assert abs(out.alpha[k] - prev) < 1e-8
    assert abs(out.end - 2.0) < 1e-8


def test_pipeline_wraps_requests():
    sh = ShaperFir(np.full(4, 0.25), 0.01)
    out = motion.run_pipeline([Update(0.0, 1.5 * PI)], LimiterConfig(), sh)
    assert out.end == pytest.approx(-0.5 * PI)


def test_pipeline_quantises_when_enabled():
    sh = ShaperFir(np.full(4, 0.25), 0.01)
    cfg = LimiterConfig(quantize=True)
    out = motion.run_pipeline([Update(0.0, 0.3), Update(0.05, 0.77)], cfg, sh)
    q = out.end / cfg.step_angle
    assert abs(q - round(q)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.0, 2.0), st.floats(-7.0, 7.0)), min_size=1, max_size=6),
    st.floats(0.0, 2.0),
)
def test_pipeline_is_causal(raw, cut):
    ups = sorted(raw)
    sh = ShaperFir(np.array([0.2, 0.0, 0.5, 0.3]), 0.01)
    horizon = 2.5
    full = motion.run_pipeline(ups, LimiterConfig(), sh, horizon=horizon)
    early = motion.run_pipeline([u for u in ups if u[0] <= cut], LimiterConfig(), sh, horizon=horizon)
    k = int(math.floor(cut / sh.Ts + 1e-9))
    # ticks before the cut only see requests up to the cut
    assert np.array_equal(full.alpha[:k], early.alpha[:k])


def test_pipeline_rejects_unordered_updates():
    sh = shaper.identity()
    with pytest.raises(MotionError, match="nondecreasing"):
        motion.run_pipeline([Update(1.0, 0.0), Update(0.5, 1.0)], LimiterConfig(), sh)


# ---------------------------------------------------------------- files


def test_profile_csv_roundtrip(tmp_path, h2_design):
    p = motion.shaped_profile(motion.step_profile(0.0, PI), h2_design.shaper, "h2-opt-shaped")
    f = tmp_path / "p.csv"
    motion.save_profile(p, f)
    back = motion.load_profile(f)
    assert back.alpha.tobytes() == p.alpha.tobytes()
    assert back.Ts == p.Ts
    assert f.read_text().splitlines()[0] == "t,alpha"


def test_update_csv_roundtrip(tmp_path):
    ups = [Update(0.1, 1.0 / 3.0), Update(0.25, -PI)]
    f = tmp_path / "u.csv"
    motion.save_updates(ups, f)
    assert motion.load_updates(f) == ups
    assert f.read_text().splitlines()[0] == "t,angle"
