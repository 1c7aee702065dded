"""Walking input: ankle trajectories relative to the hip and leg kinematics.

Leg angles are measured from the downward vertical and are positive when
the distal end of a segment trails its proximal joint (clockwise with x
forward, z up).  Angular rates are reported counter-clockwise, i.e.
``omega = -d(theta)/dt``, so that the ankle frame angle
``theta_a = pi/2 - (theta1 + theta2)`` has rate ``omega1 + omega2``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

L1 = 0.47
L2 = 0.45
_COLS = ("t", "lx", "lz", "rx", "rz")
_VCOLS = ("lvx", "lvz", "rvx", "rvz")


class GaitFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReachError(ValueError):
    """Ankle target outside the leg's reachable annulus."""


@dataclass(frozen=True)
class GaitProfile:
    """Sampled left/right ankle positions relative to the hip (body frame)."""

    time: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_vel: np.ndarray | None = None
    right_vel: np.ndarray | None = None
    step_events: tuple = ()
    loopable: bool = False
    _splines: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.time, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("gait needs at least 2 samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("gait time must be strictly increasing")
        left = np.asarray(self.left, dtype=float).reshape(t.size, 2)
        right = np.asarray(self.right, dtype=float).reshape(t.size, 2)
        given = self.left_vel is not None and self.right_vel is not None
        if given:
            lv = np.asarray(self.left_vel, dtype=float).reshape(t.size, 2)
            rv = np.asarray(self.right_vel, dtype=float).reshape(t.size, 2)
            splines = (CubicHermiteSpline(t, left, lv, axis=0),
                       CubicHermiteSpline(t, right, rv, axis=0))
        else:
            lv = np.gradient(left, t, axis=0, edge_order=1)
            rv = np.gradient(right, t, axis=0, edge_order=1)
            splines = (PchipInterpolator(t, left, axis=0), PchipInterpolator(t, right, axis=0))
        events = tuple(float(e) for e in self.step_events)
        if any(e < t[0] - 1e-12 or e > t[-1] + 1e-12 for e in events):
            raise ValueError("step events must lie within the gait time range")
        for name, arr in (("time", t), ("left", left), ("right", right),
                          ("left_vel", lv), ("right_vel", rv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "step_events", events)
        object.__setattr__(self, "_splines", (splines, (splines[0].derivative(), splines[1].derivative())))

    @property
    def duration(self) -> float:
        return float(self.time[-1] - self.time[0])

    def check_reach(self, l1: float = L1, l2: float = L2) -> None:
        for name, arr in (("left", self.left), ("right", self.right)):
            d = np.hypot(arr[:, 0], arr[:, 1])
            bad = np.flatnonzero(d > l1 + l2 + 1e-12)
            if bad.size:
                i = bad[0]
                raise ReachError(f"{name} ankle at t={self.time[i]:g} s is {d[i]:.4f} m from "
                                 f"the hip, beyond l1 + l2 = {l1 + l2:.4f} m")


def sample(profile: GaitProfile, t):
    """Interpolated ankle states at time(s) ``t``.

    Returns ``(left_pos, left_vel, right_pos, right_vel)``, each shaped
    ``t.shape + (2,)``.  Loopable profiles wrap ``t`` onto their period;
    otherwise ``t`` must lie in the sampled range.
    """
    t = np.asarray(t, dtype=float)
    t0, t1 = profile.time[0], profile.time[-1]
    if profile.loopable:
        t = t0 + np.mod(t - t0, t1 - t0)
    elif np.any(t < t0 - 1e-12) or np.any(t > t1 + 1e-12):
        raise ValueError(f"t outside gait range [{t0:g}, {t1:g}] s")
    t = np.clip(t, t0, t1)
    (ls, rs), (ld, rd) = profile._splines
    lp, rp = ls(t), rs(t)
    # return stored samples bit-exactly at the sample times
    i = np.clip(np.searchsorted(profile.time, t), 0, profile.time.size - 1)
    hit = profile.time[i] == t
    if np.any(hit):
        lp[hit] = profile.left[i[hit]]
        rp[hit] = profile.right[i[hit]]
    return lp, ld(t), rp, rd(t)


def _hermite(u):
    return (2 * u**3 - 3 * u**2 + 1, u**3 - 2 * u**2 + u, -2 * u**3 + 3 * u**2, u**3 - u**2)


def _hermite_d(u):
    return (6 * u**2 - 6 * u, 3 * u**2 - 4 * u + 1, -6 * u**2 + 6 * u, 3 * u**2 - 2 * u)


def synth_gait(step_length: float = 0.5, step_period: float = 0.6, lift_height: float = 0.1,
               n_steps: int = 4, hip_height: float = 0.85, l1: float = L1, l2: float = L2,
               sample_dt: float = 1e-3) -> GaitProfile:
    """Parametric alternating-leg walking profile.

    The left leg starts in stance.  A stance ankle slides back under the hip
    at ``-step_length/step_period``; a swing ankle follows a cubic forward
    sweep with a ``sin^2`` lift of apex ``lift_height``.  Velocities are
    continuous at every phase switch, and a step event is recorded at each
    swing touch-down.
    """
    if not (step_length > 0 and step_period > 0 and hip_height > 0 and lift_height >= 0):
        raise ValueError("gait parameters must be positive")
    if int(n_steps) < 1:
        raise ValueError("n_steps must be at least 1")
    n_steps = int(n_steps)
    s, T, h = float(step_length), float(step_period), float(hip_height)
    per_step = max(2, int(round(T / sample_dt)))
    t = np.linspace(0.0, n_steps * T, n_steps * per_step + 1)
    j = np.minimum((t // T).astype(int), n_steps - 1)
    u = t / T - j

    stance_x = s / 2 - s * u
    stance_vx = np.full_like(u, -s / T)
    h00, h10, h01, h11 = _hermite(u)
    d00, d10, d01, d11 = _hermite_d(u)
    swing_x = -s / 2 * h00 - s * h10 + s / 2 * h01 - s * h11
    swing_vx = (-s / 2 * d00 - s * d10 + s / 2 * d01 - s * d11) / T
    swing_z = -h + lift_height * np.sin(math.pi * u) ** 2
    swing_vz = lift_height * math.pi * np.sin(2 * math.pi * u) / T

    left_stance = (j % 2) == 0
    zeros = np.zeros_like(u)
    lx = np.where(left_stance, stance_x, swing_x)
    lz = np.where(left_stance, -h, swing_z)
    rx = np.where(left_stance, swing_x, stance_x)
    rz = np.where(left_stance, swing_z, -h)
    lvx = np.where(left_stance, stance_vx, swing_vx)
    lvz = np.where(left_stance, zeros, swing_vz)
    rvx = np.where(left_stance, swing_vx, stance_vx)
    rvz = np.where(left_stance, swing_vz, zeros)
    events = tuple((k + 1) * T for k in range(n_steps))
    profile = GaitProfile(t, np.column_stack([lx, lz]), np.column_stack([rx, rz]),
                          np.column_stack([lvx, lvz]), np.column_stack([rvx, rvz]), events)
    profile.check_reach(l1, l2)
    return profile


def _default_events(t: np.ndarray, left: np.ndarray, right: np.ndarray) -> tuple:
    # touch-downs: an ankle dropping through 10% of its vertical range above its lowest point
    events = []
    for z in (left[:, 1], right[:, 1]):
        span = z.max() - z.min()
        if span <= 1e-9:
            continue
        level = z.min() + 0.1 * span
        above = z > level
        for i in np.flatnonzero(above[:-1] & ~above[1:]):
            f = (z[i] - level) / (z[i] - z[i + 1])
            events.append(float(t[i] + f * (t[i + 1] - t[i])))
    return tuple(sorted(events))


def load_gait(source: Union[str, Path, IO], l1: float = L1, l2: float = L2) -> GaitProfile:
    """Parse a gait CSV (``t,lx,lz,rx,rz[,lvx,lvz,rvx,rvz]``).

    ``# step_event=<t>`` comments declare stance switches and
    ``# loop=true`` marks the profile periodic.  Without declared events,
    touch-downs are detected from the ankle heights.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"gait file not found: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    events: list[float] = []
    loop = False
    header: list[str] | None = None
    rows: list[list[float]] = []
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            key = key.strip()
            if key == "step_event":
                try:
                    events.append(float(value))
                except ValueError:
                    raise GaitFormatError("bad step_event value", lineno) from None
            elif key == "loop":
                loop = value.strip().lower() in ("true", "1", "yes")
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if header not in (list(_COLS), list(_COLS + _VCOLS)):
                raise GaitFormatError("malformed header, expected " + ",".join(_COLS)
                                      + "[," + ",".join(_VCOLS) + "]", lineno)
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise GaitFormatError(f"ragged row: expected {len(header)} fields, got {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise GaitFormatError("non-numeric field", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise GaitFormatError("non-finite value", lineno)
        if rows and vals[0] <= rows[-1][0]:
            raise GaitFormatError("time is not strictly increasing", lineno)
        d = max(math.hypot(vals[1], vals[2]), math.hypot(vals[3], vals[4]))
        if d > l1 + l2 + 1e-12:
            raise ReachError(f"line {lineno}: ankle {d:.4f} m from the hip exceeds "
                             f"l1 + l2 = {l1 + l2:.4f} m")
        rows.append(vals)
        lines.append(lineno)
    if header is None:
        raise GaitFormatError("malformed header: file is empty")
    if len(rows) < 2:
        raise GaitFormatError("need at least 2 samples")
    data = np.array(rows)
    t, left, right = data[:, 0], data[:, 1:3], data[:, 3:5]
    lv = rv = None
    if data.shape[1] == 9:
        lv, rv = data[:, 5:7], data[:, 7:9]
    if not events:
        events = list(_default_events(t, left, right))
    return GaitProfile(t, left, right, lv, rv, tuple(events), loop)


def write_gait(profile: GaitProfile, dest, with_velocities: bool = True) -> None:
    out = io.StringIO()
    for e in profile.step_events:
        out.write(f"# step_event={e!r}\n")
    if profile.loopable:
        out.write("# loop=true\n")
    cols = _COLS + (_VCOLS if with_velocities else ())
    out.write(",".join(cols) + "\n")
    data = [profile.time[:, None], profile.left, profile.right]
    if with_velocities:
        data += [profile.left_vel, profile.right_vel]
    for row in np.hstack(data):
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(out.getvalue(), encoding="utf-8")
    else:
        dest.write(out.getvalue())


@dataclass(frozen=True)
class LegState:
    theta1: np.ndarray | float
    theta2: np.ndarray | float
    omega1: np.ndarray | float = 0.0
    omega2: np.ndarray | float = 0.0

    @property
    def theta_a(self):
        return 0.5 * math.pi - (self.theta1 + self.theta2)

    @property
    def omega_a(self):
        return self.omega1 + self.omega2


def _u(s):
    return np.stack([-np.sin(s), -np.cos(s)], axis=-1)


def forward_kinematics(theta1, theta2, l1: float = L1, l2: float = L2) -> np.ndarray:
    """Ankle position relative to the hip."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    return l1 * _u(theta1) + l2 * _u(theta1 + theta2)


def inverse_kinematics(ankle_rel, l1: float = L1, l2: float = L2):
    """Hip and knee angles placing the ankle at ``ankle_rel`` (knee-forward branch)."""
    p = np.asarray(ankle_rel, dtype=float)
    x, z = p[..., 0], p[..., 1]
    d = np.hypot(x, z)
    tol = 1e-12
    if np.any(d > l1 + l2 + tol):
        raise ReachError(f"ankle target {np.max(d):.6g} m away exceeds l1 + l2 = {l1 + l2:.6g} m")
    if np.any(d < abs(l1 - l2) - tol):
        raise ReachError(f"ankle target {np.min(d):.6g} m away is inside |l1 - l2| = {abs(l1 - l2):.6g} m")
    c2 = np.clip((d * d - l1 * l1 - l2 * l2) / (2 * l1 * l2), -1.0, 1.0)
    theta2 = np.arccos(c2)
    phi = np.arctan2(-x, -z)
    theta1 = phi - np.arctan2(l2 * np.sin(theta2), l1 + l2 * np.cos(theta2))
    if theta1.ndim == 0:
        return float(theta1), float(theta2)
    return theta1, theta2


def leg_state(ankle_rel, ankle_vel, l1: float = L1, l2: float = L2) -> LegState:
    """Joint angles and counter-clockwise joint rates for an ankle trajectory point."""
    theta1, theta2 = inverse_kinematics(ankle_rel, l1, l2)
    theta1 = np.asarray(theta1)
    theta2 = np.asarray(theta2)
    v = np.asarray(ankle_vel, dtype=float)
    psi = theta1 + theta2
    # columns of the Jacobian d(ankle)/d(theta1, theta2)
    a = l1 * np.stack([-np.cos(theta1), np.sin(theta1)], axis=-1)
    b = l2 * np.stack([-np.cos(psi), np.sin(psi)], axis=-1)
    j1 = a + b
    det = j1[..., 0] * b[..., 1] - j1[..., 1] * b[..., 0]
    singular = np.abs(np.sin(theta2)) < 1e-9
    safe = np.where(singular, 1.0, det)
    th1_dot = (v[..., 0] * b[..., 1] - v[..., 1] * b[..., 0]) / safe
    th2_dot = (j1[..., 0] * v[..., 1] - j1[..., 1] * v[..., 0]) / safe
    # fully stretched leg: only the tangential component is realizable
    tangential = (v[..., 0] * -np.cos(theta1) + v[..., 1] * np.sin(theta1)) / (l1 + l2)
    th1_dot = np.where(singular, tangential, th1_dot)
    th2_dot = np.where(singular, 0.0, th2_dot)
    if theta1.ndim == 0:
        return LegState(float(theta1), float(theta2), float(-th1_dot), float(-th2_dot))
    return LegState(theta1, theta2, -th1_dot, -th2_dot)


def ankle_frame(leg: LegState):
    """``(theta_a, omega_a)`` of the ankle frame for a leg state."""
    return leg.theta_a, leg.omega_a
