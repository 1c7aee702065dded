"""Foot contours, their plate discretization, and foot-to-world transforms."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .stressmap import wrap_beta

CANONICAL = ("ellipse", "rectangle", "circle", "reversed_L", "triangle")
DEFAULT_WIDTH = 0.08
_DENSE = 2001


@dataclass(frozen=True)
class FootContour:
    """Ordered polyline of the foot outline in the foot frame (x forward, z up).

    The ankle attaches at ``ankle_offset``; when the shank is upright the
    foot frame is aligned with the world axes.
    """

    vertices: np.ndarray
    ankle_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    width: float = DEFAULT_WIDTH
    label: str = "contour"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise ValueError("contour needs at least 2 vertices of (x, z)")
        if not np.all(np.isfinite(v)):
            raise ValueError("contour vertices must be finite")
        seg = np.hypot(*np.diff(v, axis=0).T)
        if np.any(seg <= 1e-9):
            raise ValueError("consecutive contour vertices must be distinct")
        if not self.width > 0:
            raise ValueError("foot width must be positive")
        off = np.asarray(self.ankle_offset, dtype=float).reshape(2)
        v.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "ankle_offset", off)
        object.__setattr__(self, "width", float(self.width))

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.vertices, axis=0).T).sum())

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "width_m": self.width,
            "ankle_offset": [float(c) for c in self.ankle_offset],
            "vertices": [[float(x), float(z)] for x, z in self.vertices],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FootContour":
        return cls(np.array(d["vertices"], dtype=float),
                   np.array(d.get("ankle_offset", [0.0, 0.0]), dtype=float),
                   float(d.get("width_m", DEFAULT_WIDTH)), d.get("label", "contour"))


def save_contour(contour: FootContour, path) -> None:
    Path(path).write_text(json.dumps(contour.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_contour(path) -> FootContour:
    return FootContour.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class PlateSet:
    """Per-plate geometry.  ``velocity`` is zero for foot-frame partitions."""

    p1: np.ndarray
    p2: np.ndarray
    center: np.ndarray
    beta: np.ndarray
    dC: np.ndarray
    anchor: np.ndarray
    velocity: np.ndarray

    def __len__(self) -> int:
        return self.beta.size


def make_canonical(kind: str, contact_length: float, width: float = DEFAULT_WIDTH) -> FootContour:
    """Bottom outline of one of the five reference foot shapes.

    Every shape spans ``contact_length`` horizontally and has its top at
    z = 0.  The ellipse and the sided shapes use a 2:1 aspect ratio; the
    circle is a half disc of diameter ``contact_length``.  The reversed L
    has its upright bar at the toe end.  The ankle sits at the top-center
    (the foot-frame origin) for every shape.
    """
    if not contact_length > 0:
        raise ValueError("contact_length must be positive")
    c = float(contact_length)
    a, b = c / 2, c / 2
    if kind in ("ellipse", "circle"):
        depth = c / 4 if kind == "ellipse" else c / 2
        t = np.linspace(math.pi, 2 * math.pi, _DENSE)
        verts = np.column_stack([a * np.cos(t), depth * np.sin(t)])
        verts[0] = (-a, 0.0)
        verts[-1] = (a, 0.0)
    elif kind == "rectangle":
        verts = np.array([[-a, 0.0], [-a, -b], [a, -b], [a, 0.0]])
    elif kind == "triangle":
        verts = np.array([[-a, 0.0], [0.0, -b], [a, 0.0]])
    elif kind == "reversed_L":
        t = b / 4
        verts = np.array([[a - t, 0.0], [a - t, -b + t], [-a, -b + t], [-a, -b], [a, -b], [a, 0.0]])
    else:
        raise ValueError(f"unknown foot shape {kind!r}; choose from {', '.join(CANONICAL)}")
    return FootContour(verts, np.zeros(2), width, kind)


def waypoints(k: Sequence[int], L: float, H: float, K: int) -> np.ndarray:
    """Waypoint coordinates, spaced uniformly over [-L, L] at depths k*H/K."""
    k = np.asarray(k)
    n = k.size
    if n < 2:
        raise ValueError("need at least 2 waypoints")
    if not (np.issubdtype(k.dtype, np.integer) or np.all(k == np.round(k))):
        raise ValueError("waypoint indices must be integers")
    if np.any(k < 1) or np.any(k > K):
        raise ValueError(f"waypoint indices must lie in 1..{K}")
    i = np.arange(n)
    x = -L + 2 * L * i / (n - 1)
    x[-1] = L
    z = -H * (k / K)
    return np.column_stack([x, z])


def from_waypoints(k: Sequence[int], L: float, H: float, K: int,
                   width: float = DEFAULT_WIDTH, samples: int = _DENSE) -> FootContour:
    """Foot contour through integer-indexed waypoints joined by a natural cubic spline.

    The sampled bottom is clipped to [-H, 0]; vertical end caps rise from
    the first and last waypoints to z = 0.
    """
    if int(K) < 1:
        raise ValueError("K must be a positive integer")
    pts = waypoints(k, L, H, K)
    spline = CubicSpline(pts[:, 0], pts[:, 1], bc_type="natural")
    # sample each spline piece separately so every waypoint is a polyline vertex
    per = max(1, math.ceil((samples - 1) / (len(pts) - 1)))
    u = np.arange(per) / per
    xa, xb = pts[:-1, 0], pts[1:, 0]
    x = np.append((xa[:, None] + u * (xb - xa)[:, None]).ravel(), pts[-1, 0])
    z = np.clip(spline(x), -H, 0.0)
    z[::per] = pts[:, 1]
    bottom = np.column_stack([x, z])
    verts = np.vstack([[[-L, 0.0]], bottom, [[L, 0.0]]])
    label = "waypoints:" + ",".join(str(int(v)) for v in np.asarray(k))
    return FootContour(verts, np.zeros(2), width, label)


def _merge_collinear(v: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(v) - 1):
        a = v[i] - v[keep[-1]]
        b = v[i + 1] - v[i]
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) <= 1e-12 * np.hypot(*a) * np.hypot(*b) and a @ b > 0:
            continue
        keep.append(i)
    keep.append(len(v) - 1)
    return v[keep]


def discretize(contour: FootContour, N: int) -> PlateSet:
    """Split the contour into ``N`` plates of equal arc length (foot frame)."""
    if int(N) < 1:
        raise ValueError("N must be a positive integer")
    v = _merge_collinear(contour.vertices)
    seg = np.hypot(*np.diff(v, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if not total > 1e-9:
        raise ValueError("degenerate contour")
    targets = total * np.arange(N + 1) / N
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    frac = (targets - s[idx]) / seg[idx]
    pts = v[idx] + frac[:, None] * (v[idx + 1] - v[idx])
    pts[0], pts[-1] = v[0], v[-1]
    return _plates(pts[:-1], pts[1:], np.full(N, total / N), contour.ankle_offset,
                   np.zeros((N, 2)))


def _plates(p1, p2, dC, anchor, velocity, center=None) -> PlateSet:
    d = p2 - p1
    beta = wrap_beta(np.arctan2(d[:, 1], d[:, 0]))
    if center is None:
        center = 0.5 * (p1 + p2)
    return PlateSet(p1, p2, center, np.atleast_1d(beta), dC,
                    np.asarray(anchor, dtype=float), velocity)


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def world_plates(plates: PlateSet, position, theta_a: float,
                 velocity=(0.0, 0.0), omega_a: float = 0.0) -> PlateSet:
    """Place foot-frame plates in the world given the ankle pose and twist.

    ``theta_a`` is the ankle-frame angle; the foot frame is rotated by
    ``theta_a - pi/2`` so an upright shank leaves the foot level.  Plate
    velocities follow the rigid-body rule v = v_ankle + omega x r.
    """
    R = rotation(theta_a - 0.5 * math.pi)
    pos = np.asarray(position, dtype=float)
    r1 = (plates.p1 - plates.anchor) @ R.T
    r2 = (plates.p2 - plates.anchor) @ R.T
    rc = (plates.center - plates.anchor) @ R.T
    vel = np.asarray(velocity, dtype=float) + omega_a * np.column_stack([-rc[:, 1], rc[:, 0]])
    return _plates(r1 + pos, r2 + pos, plates.dC, np.zeros(2), vel, rc + pos)
