"""Finite-volume discretization of the 1-D Fokker-Planck equation

    p_t = -(f(r, x) p)_x + 1/2 (sigma(x)^2 p)_xx

on a truncated grid, advanced in time by implicit Euler.  Grids are uniform
by default; a graded grid refines geometrically toward one anchor point,
which resolves densities collapsing onto a zero of sigma.

The probability flux is written as J = a p - D p_x with D = sigma^2 / 2 and
effective drift a = f - D'.  At each cell interface the flux is evaluated with
the Scharfetter-Gummel (exponentially fitted) formula, which is upwind when D
vanishes, centered when a vanishes, and always yields an M-matrix, so the
implicit step preserves positivity.  D' is differenced from node values, so
points where sigma = 0 carry no diffusive leakage.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Literal

import numpy as np

from . import tridiag
from .errors import ConfigError, NumericalError
from .systems import SdeSystem

BoundaryPolicy = Literal["reflecting", "absorbing"]
POLICIES = ("reflecting", "absorbing")

MIN_CELLS = 16
CLIP_RTOL = 1e-12
BOUNDARY_DENSITY_TOL = 1e-8


class BoundaryLeakWarning(UserWarning):
    """Density at a boundary cell exceeded the truncation tolerance."""


class ClippingWarning(UserWarning):
    """A step produced negative density beyond round-off level."""


@dataclass(frozen=True)
class Grading:
    """Cell widths grow from ``finest`` at ``anchor`` by a factor (1 + growth) per cell, up to ``coarse``."""

    anchor: float
    coarse: float
    growth: float = 0.02
    finest: float = 1e-9


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int
    policy: BoundaryPolicy = "reflecting"
    grading: Grading | None = None

    @property
    def h(self) -> float:
        """Uniform spacing, or the coarse spacing of a graded grid."""
        if self.grading is not None:
            return self.grading.coarse
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def faces(self) -> np.ndarray:
        if self.grading is None:
            return self.x_min + np.arange(self.n + 1) * self.h
        return _graded_faces(self.x_min, self.x_max, self.grading)

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.grading is None:
            return self.x_min + (np.arange(self.n) + 0.5) * self.h
        f = self.faces
        return 0.5 * (f[:-1] + f[1:])

    @cached_property
    def widths(self) -> np.ndarray:
        if self.grading is None:
            return np.full(self.n, self.h)
        return np.diff(self.faces)

    @cached_property
    def spacing(self) -> np.ndarray:
        """Distances between adjacent nodes, including mirror ghosts beyond both walls (n + 1 values)."""
        if self.grading is None:
            return np.full(self.n + 1, self.h)
        w = self.widths
        return np.concatenate([[w[0]], 0.5 * (w[:-1] + w[1:]), [w[-1]]])

    @property
    def center(self) -> float:
        return 0.5 * (self.x_min + self.x_max)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.x_max - self.x_min)


def _graded_offsets(length: float, g: Grading) -> np.ndarray:
    """Face offsets from the anchor out to ``length``, graded then uniform."""
    out = [0.0]
    while True:
        w = max(g.finest, g.growth * out[-1])
        if w >= g.coarse or out[-1] + w >= length:
            break
        out.append(out[-1] + w)
    rest = length - out[-1]
    m = max(1, math.ceil(rest / g.coarse - 1e-9))
    out.extend(out[-1] + rest * np.arange(1, m + 1) / m)
    out[-1] = length
    return np.asarray(out)


def _graded_faces(x_min: float, x_max: float, g: Grading) -> np.ndarray:
    left = g.anchor - _graded_offsets(g.anchor - x_min, g)[::-1]
    right = g.anchor + _graded_offsets(x_max - g.anchor, g)[1:]
    left[0] = x_min
    right[-1] = x_max
    return np.concatenate([left, right])


def build_grid(x_min: float, x_max: float, n: int, policy: BoundaryPolicy = "reflecting") -> Grid:
    x_min, x_max = float(x_min), float(x_max)
    if not (np.isfinite(x_min) and np.isfinite(x_max) and x_min < x_max):
        raise ConfigError(f"invalid range: need x_min < x_max, got ({x_min}, {x_max})")
    if int(n) != n or n < MIN_CELLS:
        raise ConfigError(f"too few cells: n = {n}, need at least {MIN_CELLS}")
    if policy not in POLICIES:
        raise ConfigError(f"boundary policy must be one of {POLICIES}, got {policy!r}")
    return Grid(x_min, x_max, int(n), policy)


def build_graded_grid(
    x_min: float,
    x_max: float,
    h: float,
    anchor: float = 0.0,
    policy: BoundaryPolicy = "reflecting",
    growth: float = 0.02,
    finest: float = 1e-9,
) -> Grid:
    """Grid of spacing ``h`` away from ``anchor``, refined geometrically toward it.

    ``anchor`` is a cell face.  Use it at a zero of sigma, where densities
    may collapse below any fixed spacing.
    """
    x_min, x_max, h = float(x_min), float(x_max), float(h)
    if not (np.isfinite(x_min) and np.isfinite(x_max) and x_min < x_max):
        raise ConfigError(f"invalid range: need x_min < x_max, got ({x_min}, {x_max})")
    if not 0 < h <= (x_max - x_min) / MIN_CELLS:
        raise ConfigError(f"spacing h = {h} must be positive and leave at least {MIN_CELLS} cells")
    if not x_min + h <= anchor <= x_max - h:
        raise ConfigError(f"anchor {anchor} must lie at least h inside [{x_min}, {x_max}]")
    if not 0 < growth < 1:
        raise ConfigError(f"growth must be in (0, 1), got {growth}")
    if not 0 < finest <= h:
        raise ConfigError(f"finest width must be in (0, h], got {finest}")
    if policy not in POLICIES:
        raise ConfigError(f"boundary policy must be one of {POLICIES}, got {policy!r}")
    g = Grading(float(anchor), h, float(growth), float(finest))
    return Grid(x_min, x_max, _graded_faces(x_min, x_max, g).size - 1, policy, g)


@dataclass
class DensityField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    @property
    def mass(self) -> float:
        return float(self.grid.widths @ self.values)


def delta_init(grid: Grid, x0: float) -> DensityField:
    """Gaussian of standard deviation 2h centered at x0, normalized to unit mass."""
    h = grid.h
    if not (grid.x_min + 3 * h < x0 < grid.x_max - 3 * h):
        raise ConfigError(
            f"x0 = {x0} too close to the boundary of [{grid.x_min}, {grid.x_max}]"
            f" (need 3h = {3 * h:g} clearance)"
        )
    return DensityField(grid, delta_block(grid, [x0])[:, 0], 0.0)


def delta_block(grid: Grid, x0s) -> np.ndarray:
    x = grid.nodes[:, None]
    x0s = np.asarray(x0s, dtype=float)[None, :]
    width = 2.0 * grid.h
    p = np.exp(-0.5 * ((x - x0s) / width) ** 2)
    return p / (grid.widths @ p)


def bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (exp(z) - 1), evaluated without overflow; B(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-12
    neg = (z < 0) & ~small
    pos = (z > 0) & ~small
    out[neg] = z[neg] / np.expm1(z[neg])
    zp = z[pos]
    out[pos] = zp * np.exp(-zp) / -np.expm1(-zp)
    return out


@dataclass(frozen=True)
class FpeOperator:
    """Tridiagonal matrix L of the semi-discrete system dp/dt = L p.

    Row i reads ``sub[i] p[i-1] + diag[i] p[i] + sup[i] p[i+1]``.
    """

    grid: Grid
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    r: float = 0.0

    def apply(self, p: np.ndarray) -> np.ndarray:
        out = self.diag * p
        out[1:] += self.sub[1:] * p[:-1]
        out[:-1] += self.sup[:-1] * p[1:]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)

    def column_sums(self) -> np.ndarray:
        """Mass-weighted column sums: the net rate of mass loss out of each cell, per unit density."""
        w = self.grid.widths
        s = w * self.diag
        s[:-1] += w[1:] * self.sub[1:]
        s[1:] += w[:-1] * self.sup[:-1]
        return s / w

    @property
    def scale(self) -> float:
        return float(max(np.abs(self.diag).max(), np.abs(self.sub).max(), np.abs(self.sup).max(), 1e-300))


def interface_coefficients(system: SdeSystem, r: float, grid: Grid):
    """Flux weights at all n+1 interfaces: J_{i+1/2} = c_left p_i + c_right p_{i+1}.

    Index k refers to the interface between cells k-1 and k (k = 0 is the
    left wall, k = n the right wall; ghost nodes supply values beyond it).
    """
    h = grid.spacing
    w = grid.widths
    ext = np.concatenate([[grid.x_min - 0.5 * w[0]], grid.nodes, [grid.x_max + 0.5 * w[-1]]])  # plus ghosts
    faces = grid.faces
    d_node = 0.5 * np.asarray(system.diffusion(ext), dtype=float) ** 2
    d_face = 0.5 * np.asarray(system.diffusion(faces), dtype=float) ** 2
    a = np.asarray(system.drift(r, faces), dtype=float) - np.diff(d_node) / h
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(d_face))):
        raise NumericalError("drift or diffusion is not finite on the grid", r=r)
    c_left = np.maximum(a, 0.0)
    c_right = np.minimum(a, 0.0)
    pe = np.full_like(a, np.inf)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        np.divide(a * h, d_face, out=pe, where=d_face > 0.0)
    # beyond |Pe| ~ 700 the fitted weights equal the upwind ones in floating point
    fitted = np.abs(pe) < 700.0
    c_left[fitted] = d_face[fitted] / h[fitted] * bernoulli(-pe[fitted])
    c_right[fitted] = -d_face[fitted] / h[fitted] * bernoulli(pe[fitted])
    return c_left, c_right


def assemble_operator(system: SdeSystem, r: float, grid: Grid) -> FpeOperator:
    w = grid.widths
    c_left, c_right = interface_coefficients(system, r, grid)
    n = grid.n
    sub = np.zeros(n)
    diag = np.zeros(n)
    sup = np.zeros(n)
    # L p_i = -(J_{i+1/2} - J_{i-1/2}) / w_i; interior interfaces are k = 1..n-1
    cl, cr = c_left[1:-1], c_right[1:-1]
    diag[:-1] -= cl / w[:-1]
    sup[:-1] -= cr / w[:-1]
    diag[1:] += cr / w[1:]
    sub[1:] += cl / w[1:]
    if grid.policy == "absorbing":
        # ghost densities are zero, so only the inner cell's share of the wall flux remains
        diag[0] += c_right[0] / w[0]
        diag[-1] -= c_left[-1] / w[-1]
    return FpeOperator(grid, sub, diag, sup, float(r))


class ImplicitEuler:
    """Backward-Euler propagator (I - dt L)^{-1}, factored once.

    ``advance`` works on an (n, k) block of densities, one column per orbit.
    """

    def __init__(self, operator: FpeOperator, dt: float):
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        self.operator = operator
        self.dt = float(dt)
        self.factors = tridiag.factor(
            -dt * operator.sub, 1.0 - dt * operator.diag, -dt * operator.sup
        )
        self.max_negativity = 0.0
        self._renormalize = operator.grid.policy == "reflecting"

    def advance(self, p: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        new, ratio = tridiag.solve(self.factors, p, out)
        if ratio.any():
            worst = float(ratio.max())
            self.max_negativity = max(self.max_negativity, worst)
            if worst > CLIP_RTOL:
                warnings.warn(
                    f"negative density {worst:.2e} x max(p) clipped", ClippingWarning, stacklevel=2
                )
            if self._renormalize:
                w = self.operator.grid.widths
                cols = np.flatnonzero(ratio)
                old = w @ p.reshape(p.shape[0], -1)[:, cols]
                now = new.reshape(new.shape[0], -1)
                now[:, cols] *= old / (w @ now[:, cols])
        return new


def step(operator: FpeOperator, field: DensityField, dt: float) -> DensityField:
    """One implicit Euler step.  Factorizes each call; use ImplicitEuler in loops."""
    if operator.grid != field.grid:
        raise ConfigError("operator and field live on different grids")
    stepper = ImplicitEuler(operator, dt)
    return DensityField(field.grid, stepper.advance(field.values), field.time + dt)


def step_count(t_final: float, dt: float) -> int:
    if not t_final > 0:
        raise ConfigError(f"t_final must be positive, got {t_final}")
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if dt > t_final:
        raise ConfigError(f"dt = {dt} exceeds t_final = {t_final}")
    return max(1, int(round(t_final / dt)))


def evolve(
    system: SdeSystem,
    r: float,
    grid: Grid,
    x0: float,
    t_final: float,
    dt: float,
    stride: int = 1,
) -> list[DensityField]:
    """Snapshots every ``stride`` steps from a delta at x0; the last is at t_final."""
    nsteps = step_count(t_final, dt)
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    field0 = delta_init(grid, x0)
    stepper = ImplicitEuler(assemble_operator(system, r, grid), dt)
    p = field0.values.copy()
    snaps = [field0]
    for k in range(1, nsteps + 1):
        p = stepper.advance(p)
        if k % stride == 0 or k == nsteps:
            snaps.append(DensityField(grid, p.copy(), k * dt))
    edge = max(p[0], p[-1])
    if edge > BOUNDARY_DENSITY_TOL:
        warnings.warn(
            f"boundary density {edge:.2e} exceeds {BOUNDARY_DENSITY_TOL:g} at r={r}, x0={x0};"
            " the truncated domain may be too small",
            BoundaryLeakWarning,
            stacklevel=2,
        )
    return snaps


def write_density_csv(snapshots: Iterable[DensityField], stream, comments: Iterable[str] = ()) -> None:
    for line in comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t", "x", "p"])
    for snap in snapshots:
        for x, p in zip(snap.grid.nodes, snap.values):
            writer.writerow([repr(float(snap.time)), repr(float(x)), repr(float(p))])
