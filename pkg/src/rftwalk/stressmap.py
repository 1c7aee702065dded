"""Local stress lookup maps for resistive force theory.

A map tabulates the horizontal and vertical stress per unit depth,
``alpha_x`` and ``alpha_z`` (N/m^3), over plate orientation ``beta`` and
motion direction ``gamma``.  Both angles are tabulated on [-pi/2, pi/2];
leftward motion is folded onto the table by mirror symmetry.

Sign conventions (x forward, z up): ``beta`` is the slope angle of the
plate, ``gamma`` the direction angle of the plate velocity, and the
stresses are components of the force the media exerts on the plate.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import IO, Union

import numpy as np

HALF_PI = 0.5 * math.pi
GRID_TOL = 1e-9
HEADER = "beta_deg,gamma_deg,alpha_x,alpha_z"


class MapFormatError(ValueError):
    """Raised for malformed stress-map files.  ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class StressMap:
    beta_grid: np.ndarray
    gamma_grid: np.ndarray
    alpha_x_table: np.ndarray
    alpha_z_table: np.ndarray
    zeta: float = 1.0
    name: str = "map"
    no_tension: bool = False
    # cached grid description used by the interpolation
    _b0: float = field(init=False, repr=False)
    _db: float = field(init=False, repr=False)
    _g0: float = field(init=False, repr=False)
    _dg: float = field(init=False, repr=False)

    def __post_init__(self):
        bg = np.asarray(self.beta_grid, dtype=float)
        gg = np.asarray(self.gamma_grid, dtype=float)
        ax = np.asarray(self.alpha_x_table, dtype=float)
        az = np.asarray(self.alpha_z_table, dtype=float)
        for grid, label in ((bg, "beta"), (gg, "gamma")):
            if grid.ndim != 1 or grid.size < 2:
                raise ValueError(f"{label} grid needs at least 2 nodes")
            step = np.diff(grid)
            if np.any(step <= 0) or np.ptp(step) > GRID_TOL:
                raise ValueError(f"{label} grid is not uniform and ascending")
            if abs(grid[0] + HALF_PI) > GRID_TOL or abs(grid[-1] - HALF_PI) > GRID_TOL:
                raise ValueError(f"{label} grid must span [-pi/2, pi/2]")
        shape = (bg.size, gg.size)
        if ax.shape != shape or az.shape != shape:
            raise ValueError(f"tables must have shape {shape}")
        if not (np.all(np.isfinite(ax)) and np.all(np.isfinite(az))):
            raise ValueError("tables contain non-finite values")
        if not (self.zeta > 0 and math.isfinite(self.zeta)):
            raise ValueError("zeta must be positive")
        for name, arr in (("beta_grid", bg), ("gamma_grid", gg),
                          ("alpha_x_table", ax), ("alpha_z_table", az)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "zeta", float(self.zeta))
        object.__setattr__(self, "_b0", float(bg[0]))
        object.__setattr__(self, "_db", float((bg[-1] - bg[0]) / (bg.size - 1)))
        object.__setattr__(self, "_g0", float(gg[0]))
        object.__setattr__(self, "_dg", float((gg[-1] - gg[0]) / (gg.size - 1)))

    def with_zeta(self, zeta: float) -> "StressMap":
        return replace(self, zeta=zeta)

    def kernel_args(self) -> tuple:
        """Flat argument tuple consumed by the compiled simulation kernel."""
        return (self._b0, self._db, self._g0, self._dg,
                np.ascontiguousarray(self.alpha_x_table),
                np.ascontiguousarray(self.alpha_z_table),
                self.zeta, self.no_tension)


def _grid(n: int = 19) -> np.ndarray:
    return np.linspace(-HALF_PI, HALF_PI, n)


def test_map(a: float, n: int = 19) -> StressMap:
    """Analytic map whose stress exactly opposes the direction of motion.

    ``alpha_x = -a cos(gamma)``, ``alpha_z = -a sin(gamma)``, independent of
    the plate orientation, sampled on an ``n`` x ``n`` grid.
    """
    if not a > 0:
        raise ValueError("stress magnitude must be positive")
    b = _grid(n)
    g = _grid(n)
    _, G = np.meshgrid(b, g, indexing="ij")
    c, s = np.cos(G), np.sin(G)
    # cos(+-pi/2) evaluates to ~6e-17; make vertical motion purely vertical
    c[np.abs(c) < 1e-12] = 0.0
    return StressMap(b, g, -a * c, -a * s, 1.0, f"test:{a:g}")


# pytest would otherwise try to collect the factory above
test_map.__test__ = False


def generic_map() -> StressMap:
    """The bundled generic dry-sand map (zeta = 1)."""
    text = resources.files("rftwalk.data").joinpath("generic_map.csv").read_text("utf-8")
    return load_stress_map(io.StringIO(text), name="generic")


def wrap_beta(beta):
    """Wrap a plate orientation into (-pi/2, pi/2] (orientation is pi-periodic)."""
    b = np.asarray(beta, dtype=float)
    w = b - math.pi * np.floor((b + HALF_PI) / math.pi)
    # floor maps the closed lower end onto -pi/2; fold it onto +pi/2
    w = np.where(w <= -HALF_PI, w + math.pi, w)
    return w if w.ndim else float(w)


def wrap_angle(theta):
    """Wrap a direction angle into (-pi, pi]."""
    t = np.asarray(theta, dtype=float)
    w = t - 2 * math.pi * np.floor((t + math.pi) / (2 * math.pi))
    w = np.where(w <= -math.pi, w + 2 * math.pi, w)
    return w if w.ndim else float(w)


def symmetry_reduce(beta, gamma):
    """Fold (beta, gamma) into the tabulated domain.

    ``gamma`` is the full direction angle of the velocity.  Motion with a
    negative horizontal component is mirrored about the vertical plane,
    which negates ``beta`` and the horizontal stress.  Returns
    ``(beta', gamma', sign_x)`` with both angles in [-pi/2, pi/2].
    """
    b = np.asarray(wrap_beta(beta), dtype=float)
    g = np.asarray(wrap_angle(gamma), dtype=float)
    left = np.abs(g) > HALF_PI
    g_out = np.where(left, np.where(g > 0, math.pi - g, -math.pi - g), g)
    b_out = np.where(left, np.asarray(wrap_beta(-b)), b)
    sign = np.where(left, -1.0, 1.0)
    if b_out.ndim == 0:
        return float(b_out), float(g_out), float(sign)
    return b_out, g_out, sign


def _interp(smap: StressMap, beta, gamma):
    def cell(x, x0, dx, n):
        u = np.clip((x - x0) / dx, 0.0, n - 1.0)
        r = np.round(u)
        u = np.where(np.abs(u - r) < 1e-9, r, u)
        i = np.minimum(np.floor(u).astype(np.int64), n - 2)
        return i, u - i

    i, fb = cell(beta, smap._b0, smap._db, smap.beta_grid.size)
    j, fg = cell(gamma, smap._g0, smap._dg, smap.gamma_grid.size)

    def bilinear(tab):
        return ((1 - fb) * (1 - fg) * tab[i, j] + fb * (1 - fg) * tab[i + 1, j]
                + (1 - fb) * fg * tab[i, j + 1] + fb * fg * tab[i + 1, j + 1])

    return bilinear(smap.alpha_x_table), bilinear(smap.alpha_z_table)


def query(smap: StressMap, beta, gamma):
    """Local stresses (alpha_x, alpha_z) for plate orientation and motion direction.

    Angles may be any finite values; they are folded by
    :func:`symmetry_reduce` before bilinear interpolation, and the result is
    scaled by the map's ``zeta``.  With ``no_tension`` set, a negative
    ``alpha_z`` on an upward-moving plate is replaced by zero.
    """
    b, g, sign = symmetry_reduce(beta, gamma)
    ax, az = _interp(smap, np.asarray(b), np.asarray(g))
    ax = smap.zeta * sign * ax
    az = smap.zeta * az
    if smap.no_tension:
        az = np.where((np.asarray(g) > 0) & (az < 0), 0.0, az)
    if np.ndim(ax) == 0:
        return float(ax), float(az)
    return ax, az


def _read_text(source) -> tuple[str, str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        return path.read_text(encoding="utf-8"), path.stem
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data, getattr(source, "name", "map")


def load_stress_map(source: Union[str, Path, IO], name: str | None = None) -> StressMap:
    """Parse a stress map from a path or a text/binary stream.

    Rows are ``beta_deg,gamma_deg,alpha_x,alpha_z`` in row-major order
    (beta outer, gamma inner).  Comment lines start with ``#``; the comment
    ``# no_tension=true`` sets the no-tension flag.  The returned map has
    ``zeta = 1``.
    """
    text, default_name = _read_text(source)
    no_tension = False
    header_seen = False
    rows: list[tuple[float, float, float, float]] = []
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            if key.strip() == "no_tension":
                no_tension = value.strip().lower() in ("true", "1", "yes")
            continue
        if not header_seen:
            cols = [c.strip() for c in line.split(",")]
            if cols != HEADER.split(","):
                raise MapFormatError(f"malformed header, expected '{HEADER}'", lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MapFormatError(f"expected 4 fields, got {len(parts)}", lineno)
        try:
            vals = tuple(float(p) for p in parts)
        except ValueError:
            raise MapFormatError("non-numeric field", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise MapFormatError("non-finite value", lineno)
        if abs(vals[0]) > 90 + 1e-7 or abs(vals[1]) > 90 + 1e-7:
            raise MapFormatError("angle out of [-pi/2, pi/2]", lineno)
        rows.append(vals)
        lines.append(lineno)
    if not header_seen:
        raise MapFormatError("malformed header: file is empty")
    if not rows:
        raise MapFormatError("no data rows")

    data = np.array(rows)
    betas = np.unique(data[:, 0])
    gammas = np.unique(data[:, 1])
    nb, ng = betas.size, gammas.size
    if data.shape[0] != nb * ng:
        raise MapFormatError(
            f"ragged grid: {data.shape[0]} rows for {nb} x {ng} nodes", lines[-1])
    expect_b = np.repeat(betas, ng)
    expect_g = np.tile(gammas, nb)
    bad = np.flatnonzero((data[:, 0] != expect_b) | (data[:, 1] != expect_g))
    if bad.size:
        raise MapFormatError("ragged grid: rows out of beta-then-gamma order", lines[bad[0]])
    for label, grid_deg in (("beta", betas), ("gamma", gammas)):
        grid = np.deg2rad(grid_deg)
        if nb < 2 or ng < 2:
            raise MapFormatError(f"{label} grid needs at least 2 nodes", lines[-1])
        if abs(grid[0] + HALF_PI) > GRID_TOL or abs(grid[-1] - HALF_PI) > GRID_TOL:
            raise MapFormatError(f"{label} grid does not span [-90, 90] degrees", lines[-1])
        if np.ptp(np.diff(grid)) > GRID_TOL:
            k = int(np.argmax(np.abs(np.diff(grid) - np.diff(grid).mean())))
            bad_value = grid_deg[k + 1]
            col = 0 if label == "beta" else 1
            row = int(np.flatnonzero(data[:, col] == bad_value)[0])
            raise MapFormatError(f"non-uniform {label} grid at {bad_value:g} deg", lines[row])
    return StressMap(
        np.linspace(-HALF_PI, HALF_PI, nb), np.linspace(-HALF_PI, HALF_PI, ng),
        data[:, 2].reshape(nb, ng), data[:, 3].reshape(nb, ng),
        1.0, name or default_name, no_tension)


def write_stress_map(smap: StressMap, dest: Union[str, Path, IO], comment: str | None = None) -> None:
    """Write ``smap`` (unscaled tables) in the CSV format read by :func:`load_stress_map`."""
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    if smap.no_tension:
        out.write("# no_tension=true\n")
    out.write(HEADER + "\n")
    bdeg = np.rad2deg(smap.beta_grid)
    gdeg = np.rad2deg(smap.gamma_grid)
    for i, b in enumerate(bdeg):
        for j, g in enumerate(gdeg):
            out.write(f"{b:.12g},{g:.12g},{float(smap.alpha_x_table[i, j])!r},{float(smap.alpha_z_table[i, j])!r}\n")
    text = out.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)
