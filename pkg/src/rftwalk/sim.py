"""Lumped-mass walker on granular terrain: RFT forces, COM integration, work."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel
from .contour import FootContour, PlateSet, discretize, rotation, world_plates
from .gait import L1, L2, GaitProfile, leg_state, sample
from .stressmap import StressMap, query

EPS_V = 1e-6
TRAJ_COLUMNS = ("t", "x_com", "z_com", "vx", "vz", "fx_l", "fz_l", "fx_r", "fz_r",
                "p_l", "p_r", "w_l", "w_r")


class SimulationDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkerParams:
    M: float = 60.0
    l1: float = L1
    l2: float = L2
    g: float = 9.81
    dt: float = 1e-4
    t_f: float | None = None          # None: play the whole gait
    foot_width: float = 0.08
    N: int = 100
    settle_time: float = 1.0
    log_dt: float = 1e-3

    def __post_init__(self):
        for name in ("M", "l1", "l2", "dt", "foot_width", "log_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if self.dt > 1e-3:
            raise ValueError("dt must not exceed 1e-3 s")
        if int(self.N) < 1 or int(self.N) != self.N:
            raise ValueError("N must be a positive integer")
        if self.settle_time < 0 or (self.t_f is not None and self.t_f < 0):
            raise ValueError("times must be non-negative")
        if _ratio(self.log_dt, self.dt) is None:
            raise ValueError("log_dt must be an integer multiple of dt")


def _ratio(a: float, b: float) -> int | None:
    r = a / b
    n = int(round(r))
    return n if n >= 1 and abs(r - n) < 1e-6 else None


@dataclass(frozen=True)
class Scenario:
    """Everything a simulation needs besides the feet."""

    gait: GaitProfile
    smap: StressMap
    params: WalkerParams = field(default_factory=WalkerParams)

    @property
    def t_f(self) -> float:
        return self.gait.duration if self.params.t_f is None else float(self.params.t_f)


@dataclass
class SimState:
    r: np.ndarray
    v: np.ndarray
    t: float = 0.0
    w_left: float = 0.0
    w_right: float = 0.0
    gamma_left: np.ndarray | None = None
    gamma_right: np.ndarray | None = None


@dataclass
class SimTrajectory:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    vx: np.ndarray
    vz: np.ndarray
    fx_l: np.ndarray
    fz_l: np.ndarray
    fx_r: np.ndarray
    fz_r: np.ndarray
    p_l: np.ndarray
    p_r: np.ndarray
    w_l: np.ndarray
    w_r: np.ndarray
    step_events: tuple = ()
    p_peak: float | None = None
    settle_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    settle_z: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def power(self) -> np.ndarray:
        """Total power, averaged over each logging interval (last sample: instantaneous)."""
        return self.p_l + self.p_r

    @property
    def work(self) -> np.ndarray:
        return self.w_l + self.w_r

    def table(self) -> np.ndarray:
        return np.column_stack([getattr(self, c) for c in
                                ("t", "x", "z", "vx", "vz", "fx_l", "fz_l", "fx_r", "fz_r",
                                 "p_l", "p_r", "w_l", "w_r")])

    def to_csv(self, dest=None) -> str:
        out = io.StringIO()
        out.write(",".join(TRAJ_COLUMNS) + "\n")
        for row in self.table():
            out.write(",".join(repr(float(v)) for v in row) + "\n")
        text = out.getvalue()
        if dest is not None:
            Path(dest).write_text(text, encoding="utf-8")
        return text


# ---------------------------------------------------------------- reference path

def plate_forces(plates: PlateSet, smap: StressMap, foot_width: float,
                 gamma_memory: np.ndarray | None = None, eps_v: float = EPS_V):
    """Per-plate RFT forces for world-frame plates.

    Returns ``(forces, gamma_memory)`` where ``forces`` is ``(N, 2)``.  The
    motion angle of a plate slower than ``eps_v`` is taken from the memory
    (initially straight down).
    """
    n = len(plates)
    mem = np.full(n, -0.5 * math.pi) if gamma_memory is None else np.array(gamma_memory, dtype=float)
    v = plates.velocity
    moving = np.hypot(v[:, 0], v[:, 1]) >= eps_v
    mem[moving] = np.arctan2(v[moving, 1], v[moving, 0])
    forces = np.zeros((n, 2))
    sub = plates.center[:, 1] < 0
    if np.any(sub):
        ax, az = query(smap, plates.beta[sub], mem[sub])
        depth = -plates.center[sub, 1]
        area = plates.dC[sub] * foot_width
        forces[sub, 0] = ax * depth * area
        forces[sub, 1] = az * depth * area
    return forces, mem


def total_grf(*feet: np.ndarray) -> np.ndarray:
    """Sum per-plate forces foot by foot, plate index ascending."""
    total = np.zeros(2)
    for forces in feet:
        fx = fz = 0.0
        for f in np.asarray(forces, dtype=float).reshape(-1, 2):
            fx += f[0]
            fz += f[1]
        total += (fx, fz)
    return total


def _plate_table(plates: PlateSet, foot_width: float) -> np.ndarray:
    c = plates.center - plates.anchor
    return np.ascontiguousarray(np.column_stack([c, plates.beta, plates.dC * foot_width]))


def _kinematics(gait: GaitProfile, times: np.ndarray, l1: float, l2: float, frozen: bool = False):
    """Rows (ax, az, vx, vz, theta_a, omega_a) per foot at ``times``."""
    lp, lv, rp, rv = sample(gait, times)
    out = []
    for p, v in ((lp, lv), (rp, rv)):
        if frozen:
            v = np.zeros_like(v)
        leg = leg_state(p, v, l1, l2)
        out.append(np.ascontiguousarray(np.column_stack(
            [p, v, np.atleast_1d(leg.theta_a), np.atleast_1d(leg.omega_a)])))
    return out


def _foot_world(plates: PlateSet, kin_row, r, v) -> PlateSet:
    pos = np.asarray(r, dtype=float) + kin_row[0:2]
    vel = np.asarray(v, dtype=float) + kin_row[2:4]
    return world_plates(plates, pos, kin_row[4], vel, kin_row[5])


def step(state: SimState, gait: GaitProfile, contours, smap: StressMap,
         params: WalkerParams, *, frozen: bool = False, gravity: float | None = None,
         accumulate: bool = True) -> SimState:
    """Advance one explicit Euler step.

    ``contours`` is a (left, right) pair of :class:`FootContour` or
    foot-frame :class:`PlateSet`.  ``frozen`` holds the gait at t = 0 with
    zero joint motion (settling); ``gravity`` overrides ``params.g``.
    """
    feet = [c if isinstance(c, PlateSet) else discretize(c, params.N) for c in contours]
    t_gait = 0.0 if frozen else state.t
    kin = _kinematics(gait, np.array([t_gait]), params.l1, params.l2, frozen)
    mems = [state.gamma_left, state.gamma_right]
    forces, powers, new_mems = [], [], []
    for plates, k, mem in zip(feet, kin, mems):
        world = _foot_world(plates, k[0], state.r, state.v)
        f, m = plate_forces(world, smap, params.foot_width, mem)
        forces.append(f)
        new_mems.append(m)
        powers.append(float(np.sum(f[:, 0] * world.velocity[:, 0] + f[:, 1] * world.velocity[:, 1])))
    F = total_grf(*forces)
    g = params.g if gravity is None else gravity
    a = np.array([F[0] / params.M, F[1] / params.M - g])
    r_new = state.r + state.v * params.dt
    v_new = state.v + a * params.dt
    if not (np.all(np.isfinite(r_new)) and np.all(np.isfinite(v_new))):
        raise SimulationDiverged(f"non-finite state at t = {state.t:g} s")
    dw = (powers[0] * params.dt, powers[1] * params.dt) if accumulate else (0.0, 0.0)
    return SimState(r_new, v_new, state.t + (0.0 if frozen else params.dt),
                    state.w_left + dw[0], state.w_right + dw[1], new_mems[0], new_mems[1])


# ---------------------------------------------------------------- driver

def gravity_ramp(n_settle: int, dt: float, g: float) -> np.ndarray:
    """Gravity per settling step: a smooth ramp over the first 3/4, then full g.

    Loading the sand slowly lets the walker sink to its quasi-static depth
    instead of overshooting it dynamically.
    """
    n_ramp = int(round(0.75 * n_settle))
    s = np.arange(n_settle) / max(n_ramp, 1)
    s = np.minimum(s, 1.0)
    return g * (s - np.sin(2 * math.pi * s) / (2 * math.pi))


def initial_com(gait: GaitProfile, contour: FootContour, params: WalkerParams) -> np.ndarray:
    """COM position that puts the lowest vertex of the stance (left) foot at z = 0."""
    kin = _kinematics(gait, np.array([0.0]), params.l1, params.l2, frozen=True)[0][0]
    R = rotation(kin[4] - 0.5 * math.pi)
    z = ((contour.vertices - contour.ankle_offset) @ R.T)[:, 1] + kin[1]
    return np.array([0.0, -float(z.min())])


def simulate(scenario: Scenario, left: FootContour, right: FootContour | None = None) -> SimTrajectory:
    """Settle the walker on its left foot, then play the gait to ``t_f``.

    Work is only accumulated during the gait phase; the trajectory's time
    axis starts at the end of settling.
    """
    right = left if right is None else right
    p = scenario.params
    gait = scenario.gait
    t_f = scenario.t_f
    if not gait.loopable and t_f > gait.duration + 1e-9:
        raise ValueError(f"t_f = {t_f:g} s exceeds the gait duration {gait.duration:g} s")
    n_gait = _ratio(t_f, p.dt) if t_f > 0 else 0
    stride = _ratio(p.log_dt, p.dt)
    if n_gait is None or n_gait % stride:
        raise ValueError("t_f must be an integer multiple of log_dt")
    n_settle = int(round(p.settle_time / p.dt))

    feet = [discretize(c, p.N) for c in (left, right)]
    tables = [_plate_table(f, p.foot_width) for f in feet]
    t_gait = gait.time[0] + np.arange(n_gait + 1) * p.dt
    kin = _kinematics(gait, t_gait, p.l1, p.l2)
    frozen = _kinematics(gait, t_gait[:1], p.l1, p.l2, frozen=True)
    kin = [np.ascontiguousarray(np.vstack([np.repeat(fz, n_settle, axis=0), k]))
           for fz, k in zip(frozen, kin)]
    gsteps = np.concatenate([gravity_ramp(n_settle, p.dt, p.g), np.full(n_gait, p.g)])

    r0 = initial_com(gait, left, p)
    n_log = n_gait // stride + 1
    log = np.zeros((n_log, len(TRAJ_COLUMNS)))
    settle_log = np.zeros(((n_settle + stride - 1) // stride, 2))
    # remembered velocity per plate; initial direction is straight down
    mems = [np.tile([0.0, -1.0], (p.N, 1)) for _ in range(2)]
    status, j, p_peak, _, _ = _kernel.run(
        kin[0], kin[1], tables[0], tables[1], mems[0], mems[1], gsteps, n_settle, stride,
        r0, np.zeros(2), p.M, p.dt, *scenario.smap.kernel_args(), EPS_V, log, settle_log)
    if status != _kernel.OK:
        raise SimulationDiverged(f"non-finite COM state after step {j} "
                                 f"(t = {(j - n_settle) * p.dt:g} s)")
    events = tuple(e - gait.time[0] for e in gait.step_events if e - gait.time[0] <= t_f + 1e-9)
    cols = dict(zip(("t", "x", "z", "vx", "vz", "fx_l", "fz_l", "fx_r", "fz_r",
                     "p_l", "p_r", "w_l", "w_r"), log.T.copy()))
    return SimTrajectory(**cols, step_events=events, p_peak=p_peak,
                         settle_t=settle_log[:, 0].copy(), settle_z=settle_log[:, 1].copy())


def foot_forces(scenario: Scenario, left: FootContour, right: FootContour | None, r, v,
                t: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Forces at one state, computed exactly as the integrator does.

    Returns per-foot ``(fx, fz, power)`` rows and the total force
    ``(Fx, Fz)``.  ``t = None`` uses the settling pose (gait at its start,
    joints at rest).  Plates slower than ``EPS_V`` take the initial
    straight-down direction.
    """
    right = left if right is None else right
    p = scenario.params
    frozen = t is None
    times = scenario.gait.time[:1] if frozen else np.array([float(t)])
    kin = _kinematics(scenario.gait, times, p.l1, p.l2, frozen)
    b0, db, g0, dg, axt, azt, zeta, no_tension = scenario.smap.kernel_args()
    raw = np.zeros((2, 3))
    for i, (contour, k) in enumerate(zip((left, right), kin)):
        table = _plate_table(discretize(contour, p.N), p.foot_width)
        mem = np.tile([0.0, -1.0], (p.N, 1))
        raw[i] = _kernel.foot_forces(k[0], table, mem, float(r[0]), float(r[1]), float(v[0]),
                                     float(v[1]), b0, db, g0, dg, axt, azt, no_tension, EPS_V)
    total = np.array([zeta * (raw[0, 0] + raw[1, 0]), zeta * (raw[0, 1] + raw[1, 1])])
    return zeta * raw, total


def simulate_reference(scenario: Scenario, left: FootContour, right: FootContour | None = None,
                       n_steps: int | None = None) -> list[SimState]:
    """Same recurrence as :func:`simulate` driven through :func:`step` (slow; for checking)."""
    right = left if right is None else right
    p = scenario.params
    feet = [discretize(c, p.N) for c in (left, right)]
    n_settle = int(round(p.settle_time / p.dt))
    n_gait = int(round(scenario.t_f / p.dt)) if n_steps is None else n_steps
    g_settle = gravity_ramp(n_settle, p.dt, p.g)
    state = SimState(initial_com(scenario.gait, left, p), np.zeros(2), scenario.gait.time[0])
    states = [state]
    for j in range(n_settle):
        state = step(state, scenario.gait, feet, scenario.smap, p, frozen=True,
                     gravity=g_settle[j], accumulate=False)
        states.append(state)
    for _ in range(n_gait):
        state = step(state, scenario.gait, feet, scenario.smap, p)
        states.append(state)
    return states
