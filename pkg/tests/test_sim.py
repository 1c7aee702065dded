import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rftwalk.contour import FootContour, discretize, make_canonical, world_plates
from rftwalk.gait import GaitProfile, synth_gait
from rftwalk.sim import (
    Scenario, SimState, SimulationDiverged, WalkerParams, foot_forces, plate_forces,
    simulate, simulate_reference, step, total_grf,
)
from rftwalk.stressmap import generic_map, test_map

REACH = 0.47 + 0.45


def _standing_gait(left_z=-REACH, right_z=-REACH, duration=1.0):
    # both legs fully extended straight down: level feet, no joint motion
    t = np.array([0.0, duration])
    return GaitProfile(t, [[0.0, left_z]] * 2, [[0.0, right_z]] * 2)


def _plate(half=0.013):
    return FootContour(np.array([[-half, 0.0], [half, 0.0]]), width=0.008)


def _world(contour, n, z, v=(0.0, 0.0)):
    return world_plates(discretize(contour, n), (0.0, z), math.pi / 2, v)


def test_plates_above_surface_feel_nothing():
    foot = make_canonical("ellipse", 0.26)
    for smap in (test_map(2e5), generic_map()):
        f, _ = plate_forces(_world(foot, 50, 0.2, (0.3, -0.5)), smap, 0.08)
        assert np.all(f == 0.0)


def test_plate_at_surface_feels_nothing():
    f, _ = plate_forces(_world(_plate(), 1, 0.0, (0.0, -1.0)), test_map(2e5), 0.008)
    assert np.all(f == 0.0)


def test_one_plate_oracle():
    # 2e5 N/m^3 * 0.01 m * 2.08e-4 m^2 straight up
    f, mem = plate_forces(_world(_plate(), 1, -0.01, (0.0, -0.2)), test_map(2e5), 0.008)
    assert f[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert f[0, 1] == pytest.approx(0.416, rel=1e-12)
    assert mem[0] == pytest.approx(-math.pi / 2)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.2), st.floats(-math.pi, math.pi), st.floats(-0.5, 0.5))
def test_force_linear_in_depth(depth, direction, tilt):
    foot = FootContour(np.array([[-0.05, 0.0], [0.05, 0.0]]))
    v = (math.cos(direction), math.sin(direction))
    a = world_plates(discretize(foot, 1), (0.0, -depth), math.pi / 2 + tilt, v)
    b = world_plates(discretize(foot, 1), (0.0, -2 * depth), math.pi / 2 + tilt, v)
    fa, _ = plate_forces(a, generic_map(), 0.08)
    fb, _ = plate_forces(b, generic_map(), 0.08)
    np.testing.assert_allclose(fb, 2 * fa, rtol=1e-12, atol=1e-12)


def test_slow_plates_remember_direction():
    plates = _world(_plate(), 1, -0.01, (1.0, 0.0))
    _, mem = plate_forces(plates, test_map(2e5), 0.008)
    assert mem[0] == pytest.approx(0.0)
    still = _world(_plate(), 1, -0.01, (0.0, 0.0))
    f, mem2 = plate_forces(still, test_map(2e5), 0.008, mem)
    # the remembered horizontal direction still resists horizontally
    assert mem2[0] == pytest.approx(0.0)
    assert f[0, 0] == pytest.approx(-0.416, rel=1e-12)


def test_total_grf_examples():
    assert np.all(total_grf(np.zeros((0, 2)), np.zeros((0, 2))) == 0.0)
    np.testing.assert_allclose(total_grf(np.array([[1.0, 2.0]]), np.array([[-0.5, 3.0]])), [0.5, 5.0])


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30),
       st.randoms())
def test_total_grf_permutation_invariant(rows, rnd):
    f = np.array(rows)
    idx = list(range(len(f)))
    rnd.shuffle(idx)
    g = f[idx]
    np.testing.assert_allclose(total_grf(f[:5], f[5:]), total_grf(g), rtol=1e-9, atol=1e-9)


def _scenario(gait=None, smap=None, **kw):
    params = WalkerParams(**{"N": 20, "settle_time": 0.0, "foot_width": 0.008, **kw})
    return Scenario(gait or _standing_gait(), smap or test_map(2e5), params)


def test_step_in_free_fall():
    sc = _scenario()
    foot = _plate()
    s = SimState(np.array([0.3, 2.0]), np.zeros(2))
    out = step(s, sc.gait, (foot, foot), sc.smap, sc.params)
    np.testing.assert_array_equal(out.r, s.r)
    np.testing.assert_allclose(out.v, [0.0, -9.81 * 1e-4], rtol=1e-15)
    assert out.t == pytest.approx(1e-4)


def test_step_with_balanced_force():
    sc = _scenario()
    foot = _plate()
    r = np.array([0.0, REACH - 0.01])
    v = np.array([0.0, -0.05])
    s = SimState(r, v)
    fz = 0.416
    # choose gravity so that the plate force exactly balances the weight
    out = step(s, sc.gait, (foot, FootContour(np.array([[-1, 5.0], [1, 5.0]]))), sc.smap,
               sc.params, gravity=fz / sc.params.M)
    np.testing.assert_allclose(out.v, v, atol=1e-15)
    np.testing.assert_allclose(out.r, r + v * 1e-4, rtol=1e-15)


def test_one_step_hand_oracle():
    M, dt, a = 60.0, 1e-4, 2e5
    sc = _scenario(M=M, dt=dt, smap=test_map(a), N=1)
    left = _plate()
    right = FootContour(np.array([[-0.013, 0.5], [0.013, 0.5]]), width=0.008)
    r0 = np.array([0.1, REACH - 0.01])
    v0 = np.array([0.0, -0.3])
    out = step(SimState(r0, v0), sc.gait, (left, right), sc.smap, sc.params)
    # hand computation for one submerged flat plate moving straight down
    depth = 0.01
    area = 0.026 * 0.008
    fz = a * depth * area
    vz = v0[1] + (fz / M - 9.81) * dt
    z = r0[1] + v0[1] * dt
    w = fz * v0[1] * dt
    assert out.v[0] == 0.0
    assert out.v[1] == pytest.approx(vz, rel=1e-12)
    assert out.r[1] == pytest.approx(z, rel=1e-12)
    assert out.r[0] == r0[0]
    assert out.w_left == pytest.approx(w, rel=1e-12)
    assert out.w_right == 0.0


def test_zero_gravity_above_ground_is_stationary():
    sc = _scenario(g=0.0, t_f=0.5, settle_time=0.1)
    foot = make_canonical("rectangle", 0.26)
    tr = simulate(sc, foot)
    assert np.all(tr.x == 0.0)
    assert np.all(tr.z == tr.z[0])
    assert np.all(tr.work == 0.0)


def test_divergence_is_reported():
    sc = _scenario(smap=test_map(1e14), dt=1e-3, t_f=0.5, settle_time=0.05)
    with pytest.raises(SimulationDiverged, match="non-finite"):
        simulate(sc, make_canonical("rectangle", 0.26))


def test_gait_shorter_than_tf_rejected():
    sc = _scenario(t_f=2.0)
    with pytest.raises(ValueError, match="exceeds the gait duration"):
        simulate(sc, _plate())


def test_params_guard():
    with pytest.raises(ValueError):
        WalkerParams(dt=2e-3)
    with pytest.raises(ValueError):
        WalkerParams(M=0.0)
    with pytest.raises(ValueError):
        WalkerParams(log_dt=1.5e-4)
    with pytest.raises(ValueError):
        WalkerParams(N=0)


@pytest.fixture(scope="module")
def walk():
    params = WalkerParams(N=40, settle_time=0.05, t_f=0.3)
    return Scenario(synth_gait(n_steps=1), generic_map().with_zeta(2), params)


def test_compiled_path_matches_reference(walk):
    foot = make_canonical("triangle", 0.26)
    tr = simulate(walk, foot)
    n_settle = 500
    states = simulate_reference(walk, foot, n_steps=3000)
    ref = states[n_settle:]
    idx = np.arange(0, 3001, 10)
    x = np.array([ref[i].r[0] for i in idx])
    z = np.array([ref[i].r[1] for i in idx])
    vx = np.array([ref[i].v[0] for i in idx])
    w = np.array([ref[i].w_left + ref[i].w_right for i in idx])
    np.testing.assert_allclose(tr.x, x, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(tr.z, z, rtol=1e-9)
    np.testing.assert_allclose(tr.vx, vx, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(tr.work, w, rtol=1e-9, atol=1e-9)


def test_bit_identical_reruns(walk):
    foot = make_canonical("ellipse", 0.26)
    assert simulate(walk, foot).to_csv() == simulate(walk, foot).to_csv()


def test_trajectory_layout(walk):
    tr = simulate(walk, make_canonical("circle", 0.26))
    assert tr.t[0] == 0.0
    np.testing.assert_allclose(np.diff(tr.t), 1e-3, rtol=1e-9)
    assert tr.t[-1] == pytest.approx(0.3)
    header = tr.to_csv().splitlines()[0]
    assert header == "t,x_com,z_com,vx,vz,fx_l,fz_l,fx_r,fz_r,p_l,p_r,w_l,w_r"
    assert tr.settle_t[0] == pytest.approx(-0.05)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.8, 0.95), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_zeta_scales_frozen_forces_exactly(z, vx, vz):
    foot = make_canonical("ellipse", 0.26)
    gait = synth_gait()
    base = Scenario(gait, generic_map(), WalkerParams(N=60))
    hard = Scenario(gait, generic_map().with_zeta(5), WalkerParams(N=60))
    f1, total1 = foot_forces(base, foot, None, (0.0, z), (vx, vz), t=0.37)
    f5, total5 = foot_forces(hard, foot, None, (0.0, z), (vx, vz), t=0.37)
    assert np.array_equal(f5, 5 * f1)
    assert np.array_equal(total5, 5 * total1)


def test_kernel_force_agrees_with_reference_forces():
    foot = make_canonical("triangle", 0.26)
    sc = Scenario(synth_gait(), generic_map(), WalkerParams(N=80))
    r, v = np.array([0.0, 0.88]), np.array([0.4, -0.2])
    got, _ = foot_forces(sc, foot, None, r, v, t=0.2)
    from rftwalk.sim import _foot_world, _kinematics
    kin = _kinematics(sc.gait, np.array([0.2]), 0.47, 0.45)
    plates = discretize(foot, 80)
    for i in range(2):
        world = _foot_world(plates, kin[i][0], r, v)
        f, _ = plate_forces(world, sc.smap, 0.08)
        np.testing.assert_allclose(got[i, :2], f.sum(axis=0), rtol=1e-12, atol=1e-12)


def test_plate_refinement_converges():
    foot = make_canonical("circle", 0.26)
    gait = synth_gait()
    totals = []
    for n in (25, 50, 100, 200):
        sc = Scenario(gait, generic_map(), WalkerParams(N=n))
        totals.append(foot_forces(sc, foot, None, (0.0, 0.86), (0.0, -0.1))[1])
    diffs = [np.linalg.norm(b - a) for a, b in zip(totals, totals[1:])]
    assert diffs[0] > diffs[1] > diffs[2]
