"""Slowest upwind settling time h / |f(face)| over a deterministic sweep's r samples.

In the noiseless limit transport is upwinded, so a root lying close to (but
not on) a cell face is approached on the time scale h / |f| at that face.
Sample grids with a large value need a longer horizon before orbits settle.

Usage: python scripts/face_relaxation.py [h]
"""

import sys

import numpy as np

DRIFTS = {
    "saddle-node": (lambda r, x: r + x * x, lambda r: [np.sqrt(-r), -np.sqrt(-r)] if r < 0 else []),
    "transcritical": (lambda r, x: r * x - x * x, lambda r: [r]),
    "pitchfork": (lambda r, x: r * x - x**3, lambda r: [np.sqrt(r), -np.sqrt(r)] if r > 0 else []),
}


def slowest(r_values, h):
    worst = (0.0, "", 0.0)
    for name, (f, roots) in DRIFTS.items():
        for r in r_values:
            for x in roots(r):
                face = np.round(x / h) * h
                v = abs(f(r, face))
                if abs(face) < 1e-12 or v < 1e-12:
                    continue  # a root on a face, or at the sigma = 0 face, is exact
                worst = max(worst, (h / v, name, float(r)))
    return worst


if __name__ == "__main__":
    h = float(sys.argv[1]) if len(sys.argv) > 1 else 0.01
    for steps in range(14, 44, 2):
        rs = np.linspace(-1.0, 1.0, steps)
        if np.any(np.isclose(rs, 0.0)):
            continue
        tau, name, r = slowest(rs, h)
        print(f"{steps:3d} samples: slowest {tau:8.1f} ({name}, r = {r:+.4f})")
