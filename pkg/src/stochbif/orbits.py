"""Mean orbits: the first moment of the evolving density, t -> E[X_t | X_0 = x0]."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, VanishedMassError
from .fpe import (
    BOUNDARY_DENSITY_TOL,
    BoundaryLeakWarning,
    DensityField,
    Grid,
    ImplicitEuler,
    delta_block,
    assemble_operator,
    delta_init,
    step_count,
)
from .systems import SdeSystem

log = logging.getLogger(__name__)

MASS_FLOOR = 1e-6


@dataclass
class MeanOrbit:
    x0: float
    r: float
    times: np.ndarray
    means: np.ndarray
    surviving_mass: np.ndarray
    conditioned: bool = False
    truncated: bool = False
    boundary_contact: bool = False
    stderr: np.ndarray | None = None

    def __len__(self) -> int:
        return self.times.size

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def terminal(self) -> float:
        return float(self.means[-1])


def first_moment(fld: DensityField) -> float:
    """Mean of the density, divided by its mass (a conditioned mean once mass leaks)."""
    mass = fld.mass
    if not mass > MASS_FLOOR:
        raise VanishedMassError(f"mass {mass:.3e} at t={fld.time} is below {MASS_FLOOR:g}")
    g = fld.grid
    return float(((g.nodes * g.widths) @ fld.values) / mass)


def mean_orbits(
    system: SdeSystem,
    r: float,
    grid: Grid,
    x0s: Sequence[float],
    t_final: float,
    dt: float,
    sample_stride: int = 100,
) -> list[MeanOrbit]:
    """Mean orbits for several initial points, advanced together.

    All columns share one factorization of the implicit step.  A column whose
    surviving mass drops to MASS_FLOOR stops there and is returned truncated;
    the others continue.
    """
    nsteps = step_count(t_final, dt)
    if sample_stride < 1:
        raise ConfigError(f"sample_stride must be >= 1, got {sample_stride}")
    x0s = [float(v) for v in x0s]
    for v in x0s:
        delta_init(grid, v)  # precondition check only
    stepper = ImplicitEuler(assemble_operator(system, r, grid), dt)
    w = grid.widths
    wx = grid.nodes * w
    conditioned = grid.policy == "absorbing"

    p = delta_block(grid, x0s)
    buf = np.empty_like(p)
    alive = np.arange(len(x0s))
    times: list[list[float]] = [[0.0] for _ in x0s]
    means: list[list[float]] = [[float(v)] for v in x0s]
    masses: list[list[float]] = [[1.0] for _ in x0s]
    m0 = wx @ p
    for j in range(len(x0s)):
        means[j][0] = float(m0[j])
    truncated = [False] * len(x0s)
    contact = [False] * len(x0s)

    for k in range(1, nsteps + 1):
        new = stepper.advance(p, buf)
        p, buf = new, p
        if k % sample_stride and k != nsteps:
            continue
        mass = w @ p
        first = wx @ p
        edge = np.maximum(p[0], p[-1]) > BOUNDARY_DENSITY_TOL
        keep = []
        for c, j in enumerate(alive):
            contact[j] |= bool(edge[c])
            if mass[c] > MASS_FLOOR:
                times[j].append(k * dt)
                means[j].append(float(first[c] / mass[c]))
                masses[j].append(float(mass[c]))
                keep.append(c)
            else:
                truncated[j] = True
        if len(keep) < alive.size:
            alive = alive[keep]
            if alive.size == 0:
                break
            p = np.ascontiguousarray(p[:, keep])
            buf = np.empty_like(p)

    out = []
    for j, v in enumerate(x0s):
        if contact[j] and not conditioned:
            log.debug("boundary density above %g for r=%g x0=%g", BOUNDARY_DENSITY_TOL, r, v)
        out.append(
            MeanOrbit(
                x0=v,
                r=float(r),
                times=np.array(times[j]),
                means=np.array(means[j]),
                surviving_mass=np.array(masses[j]),
                conditioned=conditioned,
                truncated=truncated[j],
                boundary_contact=contact[j],
            )
        )
    return out


def mean_orbit(
    system: SdeSystem,
    r: float,
    grid: Grid,
    x0: float,
    t_final: float,
    dt: float,
    sample_stride: int = 100,
) -> MeanOrbit:
    (orbit,) = mean_orbits(system, r, grid, [x0], t_final, dt, sample_stride)
    if orbit.boundary_contact and not orbit.conditioned:
        warnings.warn(
            f"boundary density exceeded {BOUNDARY_DENSITY_TOL:g} (r={r}, x0={x0})",
            BoundaryLeakWarning,
            stacklevel=2,
        )
    return orbit


def settle_index(times: np.ndarray, window_fraction: float = 0.1) -> int:
    """Index of the sample closest to (1 - window_fraction) * t_end, from below."""
    target = (1.0 - window_fraction) * times[-1]
    return int(np.searchsorted(times, target * (1 + 1e-12), side="right") - 1)


def write_orbit_csv(orbits: Iterable[MeanOrbit], stream, comments: Iterable[str] = ()) -> None:
    """Rows ``r,x0,t,mean,mass`` (plus ``stderr`` when any orbit carries one)."""
    orbits = list(orbits)
    with_se = any(o.stderr is not None for o in orbits)
    for line in comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    header = ["r", "x0", "t", "mean", "mass"] + (["stderr"] if with_se else [])
    writer.writerow(header)
    for o in orbits:
        for i in range(o.times.size):
            row = [_fmt(o.r), _fmt(o.x0), _fmt(o.times[i]), _fmt(o.means[i]), _fmt(o.surviving_mass[i])]
            if with_se:
                row.append(_fmt(o.stderr[i]) if o.stderr is not None else "nan")
            writer.writerow(row)


def _fmt(v) -> str:
    return repr(float(v))
