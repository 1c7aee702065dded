"""Regenerate src/rftwalk/data/generic_map.csv.

Samples the published generic dry-granular stress fit for resistive force theory,
a 9-term Fourier series in (beta, gamma) with coefficients in N/cm^3, on a
10 degree grid.  Their angles are measured with the depth axis pointing
down; here z points up, so the motion angle is negated and the horizontal
stress flipped to give the force on the plate in (x forward, z up) axes.
"""
from pathlib import Path

import numpy as np

from rftwalk.stressmap import StressMap, write_stress_map

# (m, n): coefficient, alpha_z uses A (cos) and B (sin), alpha_x uses C and D
A = {(0, 0): 0.206, (1, 0): 0.169}
B = {(1, 1): 0.212, (0, 1): 0.358, (-1, 1): 0.055}
C = {(1, 1): -0.124, (0, 1): 0.253, (-1, 1): 0.007}
D = {(1, 0): 0.088}
N_PER_CM3 = 1e6


def series(cos_terms, sin_terms, beta, gamma):
    out = np.zeros(np.broadcast(beta, gamma).shape)
    for (m, n), c in cos_terms.items():
        out += c * np.cos(2 * m * beta + n * gamma)
    for (m, n), c in sin_terms.items():
        out += c * np.sin(2 * m * beta + n * gamma)
    return out


def main():
    grid = np.linspace(-np.pi / 2, np.pi / 2, 19)
    b, g = np.meshgrid(grid, grid, indexing="ij")
    az = N_PER_CM3 * series(A, B, b, -g)
    ax = -N_PER_CM3 * series(C, D, b, -g)
    smap = StressMap(grid, grid, np.round(ax, 3), np.round(az, 3), 1.0, "generic", no_tension=True)
    dest = Path(__file__).resolve().parents[1] / "src" / "rftwalk" / "data" / "generic_map.csv"
    write_stress_map(smap, dest, comment=(
        "generic dry granular media, 9-term Fourier fit\n"
        "units: degrees, N/m^3; x forward, z up; force on the plate"))
    print(f"wrote {dest}")


if __name__ == "__main__":
    main()
