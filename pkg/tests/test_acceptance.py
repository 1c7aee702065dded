"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``.  The optimizer-vs-baselines
check takes several minutes.
"""
import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy.optimize import bisect

from rftwalk import cli
from rftwalk import optimize as opt
from rftwalk.contour import FootContour, discretize, make_canonical, world_plates
from rftwalk.gait import GaitProfile, forward_kinematics, inverse_kinematics, synth_gait
from rftwalk.metrics import metrics
from rftwalk.optimize import GAConfig, ShapeSpace, brute_force_best, convexity_note, optimize
from rftwalk.sim import (
    Scenario, SimState, WalkerParams, foot_forces, initial_com, plate_forces, simulate, step,
)
from rftwalk.stressmap import generic_map, test_map

REACH = 0.47 + 0.45
CANONICAL = ("ellipse", "rectangle", "circle", "reversed_L", "triangle")


def verdict(capsys, number, title, ok, detail=""):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
    assert ok, detail


def _plate(half=0.013, lift=0.0):
    return FootContour(np.array([[-half, lift], [half, lift]]), width=0.008)


def _standing_gait(duration=1.0):
    t = np.array([0.0, duration])
    return GaitProfile(t, [[0.0, -REACH]] * 2, [[0.0, -REACH]] * 2)


def _quick(smap):
    return Scenario(synth_gait(n_steps=1), smap, WalkerParams(N=30, settle_time=0.2))


# 1 -------------------------------------------------------------------------

def test_criterion_1_rft_unit_laws(capsys):
    problems = []
    foot = make_canonical("ellipse", 0.26)
    up = world_plates(discretize(foot, 50), (0.0, 0.2), math.pi / 2, (0.3, -0.5))
    for smap in (test_map(2e5), generic_map().with_zeta(5)):
        f, _ = plate_forces(up, smap, 0.08)
        if not np.all(f == 0.0):
            problems.append(f"force above surface on {smap.name}")

    rng = np.random.default_rng(1)
    flat = FootContour(np.array([[-0.05, 0.0], [0.05, 0.0]]))
    worst = 0.0
    for _ in range(200):
        depth = rng.uniform(1e-4, 0.2)
        d = rng.uniform(-math.pi, math.pi)
        tilt = rng.uniform(-0.5, 0.5)
        v = (math.cos(d), math.sin(d))
        fa, _ = plate_forces(world_plates(discretize(flat, 1), (0, -depth), math.pi / 2 + tilt, v),
                             generic_map(), 0.08)
        fb, _ = plate_forces(world_plates(discretize(flat, 1), (0, -2 * depth), math.pi / 2 + tilt, v),
                             generic_map(), 0.08)
        scale = max(np.max(np.abs(fa)), 1e-300)
        worst = max(worst, np.max(np.abs(fb - 2 * fa)) / scale)
    if worst > 1e-12:
        problems.append(f"depth law off by {worst:.2e}")

    gait = synth_gait()
    base = Scenario(gait, generic_map(), WalkerParams(N=100))
    hard = Scenario(gait, generic_map().with_zeta(5), WalkerParams(N=100))
    for t, z, vx, vz in [(0.0, 0.86, 0.0, -0.1), (0.37, 0.88, 0.4, -0.2), (1.1, 0.85, -0.3, 0.2)]:
        f1, tot1 = foot_forces(base, foot, None, (0.0, z), (vx, vz), t=t)
        f5, tot5 = foot_forces(hard, foot, None, (0.0, z), (vx, vz), t=t)
        if not (np.array_equal(f5, 5 * f1) and np.array_equal(tot5, 5 * tot1)):
            problems.append(f"zeta scaling not exact at t={t}")
        if not np.any(tot1 != 0):
            problems.append(f"frozen state at t={t} is not in contact")
    verdict(capsys, 1, "RFT unit laws", not problems, "; ".join(problems) or f"depth law max rel err {worst:.1e}")


# 2 -------------------------------------------------------------------------

def test_criterion_2_one_plate_oracle(capsys):
    smap = test_map(2e5)
    f, _ = plate_forces(world_plates(discretize(_plate(), 1), (0, -0.01), math.pi / 2, (0, -0.2)), smap, 0.008)
    ok_force = abs(f[0, 0]) <= 1e-15 and abs(f[0, 1] - 0.416) <= 1e-12 * 0.416

    # the compiled force path on the same plate
    sc = Scenario(_standing_gait(), smap, WalkerParams(N=1, settle_time=0.0, foot_width=0.008))
    _, total = foot_forces(sc, _plate(), _plate(lift=0.5), (0.0, REACH - 0.01), (0.0, -0.2), t=0.0)
    ok_kernel = abs(total[0]) <= 1e-15 and abs(total[1] - 0.416) <= 1e-12 * 0.416

    M, dt = 60.0, 1e-4
    r0 = np.array([0.1, REACH - 0.01])
    v0 = np.array([0.0, -0.3])
    sc = Scenario(_standing_gait(), smap, WalkerParams(N=1, M=M, dt=dt, settle_time=0.0, foot_width=0.008))
    out = step(SimState(r0, v0), sc.gait, (_plate(), _plate(lift=0.5)), smap, sc.params)
    fz = 2e5 * 0.01 * (0.026 * 0.008)
    expect_v = v0[1] + (fz / M - 9.81) * dt
    expect_z = r0[1] + v0[1] * dt
    expect_w = fz * v0[1] * dt
    rel = max(abs(out.v[1] - expect_v) / abs(expect_v), abs(out.r[1] - expect_z) / abs(expect_z),
              abs(out.w_left - expect_w) / abs(expect_w))
    ok_step = rel <= 1e-12 and out.v[0] == 0.0 and out.r[0] == r0[0] and out.w_right == 0.0
    verdict(capsys, 2, "one-plate oracle", ok_force and ok_kernel and ok_step,
            f"F=({f[0, 0]:.3g}, {f[0, 1]:.15g}) N, kernel Fz={total[1]:.15g}, step rel err {rel:.1e}")


# 3 -------------------------------------------------------------------------

def test_criterion_3_quasi_static_equilibrium(capsys):
    a = 1e6
    gait = synth_gait()
    foot = make_canonical("rectangle", 0.26)
    p = WalkerParams(settle_time=2.0, t_f=0.0, dt=2.5e-5)
    tr = simulate(Scenario(gait, test_map(a), p), foot)
    z0 = initial_com(gait, foot, p)[1]
    tail = tr.settle_t >= tr.settle_t[0] + 0.75 * p.settle_time
    sink = z0 - tr.settle_z[tail].mean()

    # static balance with both feet in their frozen pose, every plate moving down
    plates = discretize(foot, p.N)
    offsets = []
    for ankle in (gait.left[0], gait.right[0]):
        th1, th2 = inverse_kinematics(ankle)
        offsets.append(world_plates(plates, ankle, math.pi / 2 - (th1 + th2)).center[:, 1])
    offsets = np.concatenate(offsets)
    area = np.tile(plates.dC * p.foot_width, 2)

    def residual(z):
        return a * np.sum(np.maximum(0.0, -(z + offsets)) * area) - p.M * p.g

    z_star = bisect(residual, z0 - 1.0, z0, xtol=1e-14)
    ratio = sink / (z0 - z_star)
    verdict(capsys, 3, "quasi-static sinkage", abs(ratio - 1.0) <= 0.05,
            f"simulated {sink:.5f} m vs static {z0 - z_star:.5f} m, ratio {ratio:.4f}")


# 4 -------------------------------------------------------------------------

def test_criterion_4_euler_convergence(capsys):
    gait = synth_gait(n_steps=1)
    ends = []
    for dt in (1e-4, 5e-5, 2.5e-5):
        p = WalkerParams(settle_time=0.0, t_f=0.5, dt=dt)
        tr = simulate(Scenario(gait, generic_map(), p), make_canonical("ellipse", 0.26))
        ends.append(np.array([tr.x[-1], tr.z[-1], tr.vx[-1], tr.vz[-1]]))
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    verdict(capsys, 4, "Euler convergence", 1.5 <= ratio <= 2.5, f"difference ratio {ratio:.3f}")


# 5 -------------------------------------------------------------------------

def test_criterion_5_energy_bookkeeping(capsys):
    params = WalkerParams()
    details = []
    ok = True
    for smap in (test_map(1e6), generic_map().with_zeta(5)):
        tr = simulate(Scenario(synth_gait(), smap, params), make_canonical("rectangle", 0.26))
        # logged power is the mean over the interval that starts at each sample
        integral = float(np.sum(tr.power[:-1]) * params.log_dt)
        w = tr.work[-1]
        rel = abs(w - integral) / abs(w)
        ok &= rel <= 1e-6
        details.append(f"{smap.name}: W={w:.6g} J rel err {rel:.1e}")
        if smap.name.startswith("test"):
            mono = bool(np.all(np.diff(tr.work) <= 0.0))
            ok &= mono and w < 0
            details.append(f"non-increasing={mono}")
    verdict(capsys, 5, "energy bookkeeping", ok, ", ".join(details))


# 6 -------------------------------------------------------------------------

def test_criterion_6_material_ordering(capsys):
    gait = synth_gait()
    foot = make_canonical("rectangle", 0.26)
    params = WalkerParams()
    z0 = initial_com(gait, foot, params)[1]
    xs, sinks = [], []
    for zeta in (0.2, 1.0, 5.0):
        c = metrics(simulate(Scenario(gait, test_map(1e6).with_zeta(zeta), params), foot))
        xs.append(c.x_tf)
        sinks.append(z0 - c.z_bar)
    ok = xs[0] < xs[1] < xs[2] and sinks[0] > sinks[1] > sinks[2]
    verdict(capsys, 6, "material ordering", ok,
            "x_tf " + ", ".join(f"{x:.4f}" for x in xs) + "; sinkage " + ", ".join(f"{s:.4f}" for s in sinks))


# 7 -------------------------------------------------------------------------

def test_criterion_7_ga_matches_enumeration(capsys):
    sc = _quick(test_map(1e6).with_zeta(5))
    space = ShapeSpace(n=4, K=2)
    best_k, best_c = brute_force_best(sc, space)
    res = optimize(GAConfig(seed=0), sc, space)
    ok = res.best == best_k and res.best_cost.J_W == best_c.J_W
    verdict(capsys, 7, "GA finds the enumerated optimum", ok,
            f"GA {res.best} J={res.best_cost.J_W:.6g}, brute force {best_k} J={best_c.J_W:.6g}")


# 8 -------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_ga_beats_canonical_shapes(capsys):
    sc = Scenario(synth_gait(), generic_map().with_zeta(5), WalkerParams())
    space = ShapeSpace()
    table = {}
    for kind in CANONICAL:
        table[kind] = metrics(simulate(sc, make_canonical(kind, 2 * space.L, space.width))).J_W
    res = optimize(GAConfig(population=40, generations=60, seed=0), sc, space)
    baseline = min(table.values())
    with capsys.disabled():
        for kind, j in table.items():
            print(f"\n  canonical {kind:<10s} J_W = {j:.6g}", end="")
        print(f"\n  GA best {res.best} J_W = {res.best_cost.J_W:.6g}")
        print("  " + convexity_note(res.best))
    verdict(capsys, 8, "GA beats canonical shapes", res.best_cost.J_W <= baseline,
            f"GA {res.best_cost.J_W:.6g} vs best canonical {baseline:.6g}")


# 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(capsys, tmp_path, monkeypatch):
    sc = _quick(generic_map().with_zeta(5))
    feet = [make_canonical(k, 0.26) for k in CANONICAL]
    serial = [simulate(sc, f).to_csv() for f in feet]
    threaded = {}
    for workers in (1, 3):
        with ThreadPoolExecutor(workers) as pool:
            threaded[workers] = list(pool.map(lambda f: simulate(sc, f).to_csv(), feet))
    ok_csv = serial == threaded[1] == threaded[3]

    reports = {}
    for workers in ("1", "3"):
        monkeypatch.setenv(opt.WORKERS_ENV, workers)
        out = tmp_path / workers
        args = ["optimize", "--map", "test:1e6", "--zeta", "5", "--n", "5", "--K", "3", "--population", "10",
                "--generations", "4", "--seed", "3", "--parallel", "--out", str(out),
                "--plates", "30", "--settle-time", "0.2", "--n-steps", "1"]
        assert cli.main(args) == 0
        reports[workers] = ((out / "report.json").read_bytes(), (out / "best_contour.json").read_bytes())
    ok_rep = reports["1"] == reports["3"]
    rep = json.loads(reports["1"][0])
    verdict(capsys, 9, "determinism across worker counts", ok_csv and ok_rep,
            f"{len(feet)} trajectory CSVs, report best {rep['best_genome']}")


# 10 ------------------------------------------------------------------------

def test_criterion_10_ik_fk_round_trip(capsys):
    rng = np.random.default_rng(10)
    lo, hi = 0.47 - 0.45, 0.47 + 0.45
    d = rng.uniform(lo + 1e-6, hi - 1e-6, 10_000)
    ang = rng.uniform(-math.pi, math.pi, 10_000)
    p = np.column_stack([d * np.sin(ang), -d * np.cos(ang)])
    th1, th2 = inverse_kinematics(p)
    err = float(np.max(np.hypot(*(forward_kinematics(th1, th2) - p).T)))
    verdict(capsys, 10, "IK/FK round trip", err <= 1e-9, f"max error {err:.2e} m over 10^4 points")
