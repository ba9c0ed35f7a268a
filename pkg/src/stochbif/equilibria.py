"""Mean equilibrium states and their stability, from a fan of mean orbits.

A fan of initial points is evolved to the horizon T.  Orbits whose mean moved
less than ``settle_tol`` over the last tenth of the run are *settled*; their
terminal values are grouped by single linkage at ``merge_tol``.  A group fed
by at least two orbits is a stable mean equilibrium.  Orbits that drift to the
edge of the domain (or lose their mass without settling) *escape*.  Wherever
adjacent fan points end in different stable groups or escape directions, the
initial-condition threshold between them is refined by k-section and reported
as an unstable mean equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigError
from .fpe import Grid, build_graded_grid, build_grid
from .orbits import MeanOrbit, mean_orbits, settle_index
from .systems import SdeSystem

Stability = Literal["stable", "unstable"]

TARGET_SPACING = 0.01
DEFAULT_HALF_WIDTH = 6.0


@dataclass(frozen=True)
class ScanConfig:
    """Knobs for one equilibrium scan.  ``None`` domain fields take per-system defaults."""

    x_min: float | None = None
    x_max: float | None = None
    n: int | None = None
    policy: str | None = None
    grade_at: float | None = None
    t_final: float = 40.0
    dt: float = 1e-3
    sample_stride: int = 100
    fan_size: int = 21
    fan_fraction: float = 0.8
    fan: tuple[float, ...] | None = None
    settle_tol: float = 1e-4
    settle_window: float = 0.1
    merge_tol: float = 0.02
    escape_fraction: float = 0.9
    refine_rounds: int = 3
    max_refine_points: int = 32

    def validate(self) -> None:
        if not self.t_final > 0 or not self.dt > 0 or self.dt > self.t_final:
            raise ConfigError(f"need 0 < dt <= t_final, got dt={self.dt}, t_final={self.t_final}")
        if self.sample_stride < 1:
            raise ConfigError("sample_stride must be >= 1")
        if self.fan is None and self.fan_size < 5:
            raise ConfigError(f"fan needs at least 5 points, got {self.fan_size}")
        if self.fan is not None and len(self.fan) < 5:
            raise ConfigError(f"fan needs at least 5 points, got {len(self.fan)}")
        if not 0 < self.fan_fraction <= 1:
            raise ConfigError("fan_fraction must be in (0, 1]")
        if not 0 < self.settle_window < 1:
            raise ConfigError("settle_window must be in (0, 1)")
        for name in ("settle_tol", "merge_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.escape_fraction <= 1:
            raise ConfigError("escape_fraction must be in (0, 1]")
        if self.n is not None and self.n < 16:
            raise ConfigError(f"too few cells: n = {self.n}, need at least 16")
        if (self.x_min is None) != (self.x_max is None):
            raise ConfigError("set both x_min and x_max, or neither")

    def grid_for(self, system: SdeSystem, r: float) -> Grid:
        lo, hi, policy = default_domain(system, r)
        if self.x_min is not None:
            lo, hi = self.x_min, self.x_max
        if self.policy is not None:
            policy = self.policy
        n = self.n if self.n is not None else int(math.ceil((hi - lo) / TARGET_SPACING))
        if self.grade_at is not None:
            return build_graded_grid(lo, hi, (hi - lo) / n, self.grade_at, policy)
        return build_grid(lo, hi, n, policy)

    def fan_for(self, grid: Grid) -> np.ndarray:
        if self.fan is not None:
            return np.array(sorted(self.fan), dtype=float)
        half = self.fan_fraction * grid.half_width
        return grid.center + np.linspace(-half, half, self.fan_size)

    def merge_tol_for(self, grid: Grid) -> float:
        if grid.h > TARGET_SPACING:
            return self.merge_tol * grid.h / TARGET_SPACING
        return self.merge_tol


def is_noiseless(system: SdeSystem) -> bool:
    probe = np.linspace(-10.0, 10.0, 41)
    return not np.any(np.asarray(system.diffusion(probe), dtype=float))


def default_domain(system: SdeSystem, r: float) -> tuple[float, float, str]:
    """Truncated domain and boundary policy used when the caller gives none.

    The saddle-node drift r + x^2 blows up in finite time.  Its stochastic
    version is run with absorbing walls (means are conditioned on survival)
    on a half-width that grows with |r|; the deterministic version is run
    with reflecting walls, where blow-up shows as mass piling at the edge.
    """
    if system.name == "saddle-node":
        half = 9.0 + math.sqrt(abs(r))
        return -half, half, "reflecting" if is_noiseless(system) else "absorbing"
    return -DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH, "reflecting"


@dataclass
class OrbitOutcome:
    x0: float
    kind: Literal["settled", "unsettled", "escape"]
    value: float
    residual: float
    direction: int = 0
    conditioned: bool = False
    truncated: bool = False


@dataclass
class MeanEquilibrium:
    location: float
    stability: Stability
    basin_sample: list[float]
    residual: float
    notes: tuple[str, ...] = ()
    conditioned: bool = False


@dataclass
class EquilibriumScan:
    r: float
    equilibria: list[MeanEquilibrium]
    x0_fan: np.ndarray
    grid: Grid
    config: ScanConfig
    outcomes: list[OrbitOutcome] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def signature(self) -> tuple[int, tuple[str, ...]]:
        return len(self.equilibria), tuple(sorted(e.stability for e in self.equilibria))

    @property
    def escapes(self) -> list[tuple[float, int]]:
        return [(o.x0, o.direction) for o in self.outcomes if o.kind == "escape"]

    def stable(self) -> list[MeanEquilibrium]:
        return [e for e in self.equilibria if e.stability == "stable"]

    def unstable(self) -> list[MeanEquilibrium]:
        return [e for e in self.equilibria if e.stability == "unstable"]

    def provenance(self) -> dict:
        out = {k: v for k, v in asdict(self.config).items() if v is not None}
        out.update(x_min=self.grid.x_min, x_max=self.grid.x_max, n=self.grid.n, policy=self.grid.policy)
        return out


def classify(orbit: MeanOrbit, grid: Grid, cfg: ScanConfig) -> OrbitOutcome:
    value = orbit.terminal
    j = settle_index(orbit.times, cfg.settle_window)
    residual = abs(value - orbit.means[j]) if j < orbit.times.size - 1 else math.inf
    offset = value - grid.center
    direction = 1 if offset > 0 else -1
    common = dict(x0=orbit.x0, value=value, residual=residual,
                  conditioned=orbit.conditioned, truncated=orbit.truncated)
    if abs(offset) > cfg.escape_fraction * grid.half_width:
        return OrbitOutcome(kind="escape", direction=direction, **common)
    if residual < cfg.settle_tol:
        # A truncated orbit still counts when its conditioned mean had settled
        # before the surviving mass vanished.
        return OrbitOutcome(kind="settled", **common)
    if orbit.truncated:
        # Mass lost through the walls before the conditioned mean settled; the
        # direction is unknown, so the orbit delimits no basin.
        return OrbitOutcome(kind="escape", direction=0, **common)
    return OrbitOutcome(kind="unsettled", **common)


def _single_linkage(values: Sequence[float], tol: float) -> list[list[int]]:
    order = np.argsort(values, kind="stable")
    groups: list[list[int]] = []
    last = None
    for i in order:
        if last is None or values[i] - last > tol:
            groups.append([])
        groups[-1].append(int(i))
        last = values[i]
    return groups


@dataclass
class _Cluster:
    location: float
    lo: float
    hi: float
    members: list[OrbitOutcome]


def _label(outcome: OrbitOutcome, clusters: list[_Cluster], tol: float):
    if outcome.kind == "escape":
        if outcome.direction == 0:
            return None
        return "+" if outcome.direction > 0 else "-"
    if outcome.kind != "settled":
        return None
    for k, c in enumerate(clusters):
        if c.lo - tol <= outcome.value <= c.hi + tol:
            return k
    return None


def _first_switch(points: list[tuple[float, object]]):
    """First adjacent pair of labelled points whose labels differ."""
    labelled = [(x, lab) for x, lab in points if lab is not None]
    for (xa, la), (xb, lb) in zip(labelled, labelled[1:]):
        if la != lb:
            return (xa, la), (xb, lb)
    return None


def detect_equilibria(system: SdeSystem, r: float, config: ScanConfig | None = None) -> EquilibriumScan:
    cfg = config or ScanConfig()
    cfg.validate()
    grid = cfg.grid_for(system, r)
    fan = cfg.fan_for(grid)
    tol = cfg.merge_tol_for(grid)

    def run(x0s):
        orbits = mean_orbits(system, r, grid, x0s, cfg.t_final, cfg.dt, cfg.sample_stride)
        return [classify(o, grid, cfg) for o in orbits]

    outcomes = run(fan)
    scan = EquilibriumScan(r=float(r), equilibria=[], x0_fan=fan, grid=grid, config=cfg, outcomes=outcomes)

    settled = [o for o in outcomes if o.kind == "settled"]
    if not settled:
        scan.diagnostics.append("no settled orbit")
    if len(settled) == len(outcomes) and all(abs(o.value - o.x0) <= tol for o in outcomes):
        scan.diagnostics.append("degenerate: continuum of equilibria")
        return scan

    clusters: list[_Cluster] = []
    for group in _single_linkage([o.value for o in settled], tol):
        members = [settled[i] for i in group]
        if len(members) < 2:
            continue
        vals = np.array([m.value for m in members])
        clusters.append(_Cluster(float(vals.mean()), float(vals.min()), float(vals.max()), members))

    labels = [_label(o, clusters, tol) for o in outcomes]
    for k, c in enumerate(clusters):
        scan.equilibria.append(_stable_equilibrium(c, fan, outcomes))

    # Basin boundaries between neighbouring outcomes with different labels.
    points = sorted(zip(fan.tolist(), labels), key=lambda t: t[0])
    brackets = []
    labelled = [(x, lab) for x, lab in points if lab is not None]
    for (xa, la), (xb, lb) in zip(labelled, labelled[1:]):
        if la != lb:
            brackets.append(((xa, la), (xb, lb)))
    residual_at = {o.x0: o.residual for o in outcomes if o.kind == "settled"}
    frozen: set[int] = set()
    for _ in range(cfg.refine_rounds):
        wide = [i for i, (a, b) in enumerate(brackets) if b[0] - a[0] > tol and i not in frozen]
        if not wide:
            break
        probes, owners = [], []
        for i in wide:
            (xa, _), (xb, _) = brackets[i]
            k = min(cfg.max_refine_points, int(math.ceil((xb - xa) / tol)) - 1)
            for x in np.linspace(xa, xb, k + 2)[1:-1]:
                probes.append(float(x))
                owners.append(i)
        results = run(probes)
        for o in results:
            if o.kind == "settled":
                residual_at[o.x0] = o.residual
        for i in wide:
            (xa, la), (xb, lb) = brackets[i]
            pts = [(xa, la)] + [(o.x0, _label(o, clusters, tol)) for o, w in zip(results, owners) if w == i]
            pts.append((xb, lb))
            switch = _first_switch(pts)
            if switch is None or switch == brackets[i]:
                # no labelled probe inside: the zone between is unresolvable
                frozen.add(i)
            else:
                brackets[i] = switch
    for (xa, la), (xb, lb) in brackets:
        res = [residual_at[x] for x in (xa, xb) if x in residual_at]
        notes = []
        if xb - xa > tol:
            notes.append(f"boundary bracket width {xb - xa:.3g} exceeds merge_tol")
        if "+" in (la, lb) or "-" in (la, lb):
            notes.append("separates escape from " + ("escape" if {la, lb} == {"+", "-"} else "a stable state"))
        scan.equilibria.append(
            MeanEquilibrium(
                location=0.5 * (xa + xb),
                stability="unstable",
                basin_sample=[xa, xb],
                residual=max(res) if res else math.nan,
                notes=tuple(notes),
                conditioned=grid.policy == "absorbing",
            )
        )
    scan.equilibria.sort(key=lambda e: e.location)
    for o in outcomes:
        if o.kind == "unsettled":
            scan.diagnostics.append(f"unsettled orbit from x0={o.x0:.6g} (residual {o.residual:.2e})")
    return scan


def _stable_equilibrium(c: _Cluster, fan: np.ndarray, outcomes: list[OrbitOutcome]) -> MeanEquilibrium:
    x0s = [m.x0 for m in c.members]
    below = any(x < c.location for x in x0s)
    above = any(x > c.location for x in x0s)
    notes = []
    if not (below and above):
        side = "above" if above else "below"
        other = fan < c.location if above else fan > c.location
        nearest = None
        idx = np.flatnonzero(other)
        if idx.size:
            nearest = idx[-1] if above else idx[0]
        if nearest is None:
            notes.append(f"approached from {side} only; domain boundary on the other side")
        elif outcomes[nearest].kind == "escape":
            notes.append(f"half-stable: approached from {side}, orbits escape on the other side")
        else:
            notes.append(f"approached from {side} only")
    conditioned = any(m.conditioned for m in c.members)
    if conditioned:
        notes.append("conditioned mean under absorbing walls; truncation-dependent")
    return MeanEquilibrium(
        location=c.location,
        stability="stable",
        basin_sample=sorted(x0s),
        residual=max(m.residual for m in c.members),
        notes=tuple(notes),
        conditioned=conditioned,
    )


def with_overrides(cfg: ScanConfig, **kw) -> ScanConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
