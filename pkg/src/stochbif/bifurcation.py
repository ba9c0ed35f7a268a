"""Parameter sweeps: one equilibrium scan per r and the signature changes between them."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .equilibria import EquilibriumScan, ScanConfig, detect_equilibria
from .errors import ConfigError, NumericalError
from .systems import SdeSystem

log = logging.getLogger(__name__)

Mode = Literal["deterministic", "stochastic"]
MODES = ("deterministic", "stochastic")
DEFAULT_REFINE_WIDTH = 0.01


@dataclass
class Bifurcation:
    r_lo: float
    r_hi: float
    before: tuple
    after: tuple

    @property
    def description(self) -> str:
        return f"{format_signature(self.before)} -> {format_signature(self.after)}"


@dataclass
class BifurcationDiagram:
    system: str
    mode: Mode
    r_values: np.ndarray
    scans: list[EquilibriumScan]
    detected_bifurcations: list[Bifurcation] = field(default_factory=list)
    annotations: dict[float, list[str]] = field(default_factory=dict)

    def scan_at(self, r: float) -> EquilibriumScan:
        i = int(np.argmin(np.abs(self.r_values - r)))
        return self.scans[i]


def format_signature(sig: tuple) -> str:
    count, labels = sig
    return f"{count}:" + "+".join(labels) if labels else f"{count}:none"


def system_for_mode(system: SdeSystem, mode: str) -> SdeSystem:
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    return system.deterministic() if mode == "deterministic" else system


def _scan_task(args):
    system, r, config = args
    return detect_equilibria(system, r, config)


def _run_scans(system, rs, config, workers):
    tasks = [(system, float(r), config) for r in rs]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_task, tasks))
    return [_scan_task(t) for t in tasks]


def changes(r_values: Sequence[float], scans: Sequence[EquilibriumScan]) -> list[Bifurcation]:
    out = []
    for i in range(len(scans) - 1):
        a, b = scans[i].signature, scans[i + 1].signature
        if a != b:
            out.append(Bifurcation(float(r_values[i]), float(r_values[i + 1]), a, b))
    return out


def sweep(
    system: SdeSystem,
    mode: Mode,
    r_min: float,
    r_max: float,
    r_steps: int,
    config: ScanConfig | None = None,
    refine_width: float | None = None,
    workers: int = 1,
) -> BifurcationDiagram:
    """Scan ``r_steps`` equispaced values of r and flag signature changes.

    With ``refine_width`` set, each flagged interval is bisected in r (adding
    scans) until it is at most that wide.  A scan that fails numerically is
    recorded as an empty scan with an annotation; the sweep carries on.
    """
    if not (math.isfinite(r_min) and math.isfinite(r_max) and r_min < r_max):
        raise ConfigError(f"need r_min < r_max, got ({r_min}, {r_max})")
    if int(r_steps) != r_steps or r_steps < 2:
        raise ConfigError(f"r_steps must be an integer >= 2, got {r_steps}")
    if refine_width is not None and not refine_width > 0:
        raise ConfigError(f"refine width must be positive, got {refine_width}")
    cfg = config or ScanConfig()
    cfg.validate()
    sys_ = system_for_mode(system, mode)

    annotations: dict[float, list[str]] = {}
    scans: dict[float, EquilibriumScan] = {}

    def add(rs):
        rs = [float(r) for r in rs if float(r) not in scans]
        try:
            results = _run_scans(sys_, rs, cfg, workers)
        except NumericalError:
            # retry one at a time to isolate the failing r
            results = []
            for r in rs:
                try:
                    results.append(_scan_task((sys_, r, cfg)))
                except NumericalError as exc:
                    log.warning("scan failed at r=%g: %s", r, exc)
                    annotations.setdefault(r, []).append(f"numerical failure: {exc}")
                    results.append(None)
        for r, sc in zip(rs, results):
            scans[r] = sc if sc is not None else _empty_scan(sys_, r, cfg)
            if sc is not None and sc.diagnostics:
                annotations.setdefault(r, []).extend(sc.diagnostics)

    add(np.linspace(r_min, r_max, int(r_steps)))
    if refine_width is not None:
        while True:
            rs = sorted(scans)
            mids = [
                0.5 * (b.r_lo + b.r_hi)
                for b in changes(rs, [scans[r] for r in rs])
                if b.r_hi - b.r_lo > refine_width
            ]
            if not mids:
                break
            add(mids)

    rs = sorted(scans)
    ordered = [scans[r] for r in rs]
    return BifurcationDiagram(
        system=system.name,
        mode=mode,
        r_values=np.array(rs),
        scans=ordered,
        detected_bifurcations=changes(rs, ordered),
        annotations=annotations,
    )


def _empty_scan(system, r, cfg) -> EquilibriumScan:
    grid = cfg.grid_for(system, r)
    return EquilibriumScan(r=r, equilibria=[], x0_fan=cfg.fan_for(grid), grid=grid, config=cfg,
                           diagnostics=["numerical failure"])


def write_diagram_csv(diagram: BifurcationDiagram, stream, comments: Iterable[str] = ()) -> None:
    """Rows ``r,location,stability,residual,mode``; an empty scan gives one ``nan,escape`` row."""
    for line in comments:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["r", "location", "stability", "residual", "mode"])
    for r, scan in zip(diagram.r_values, diagram.scans):
        if not scan.equilibria:
            w.writerow([repr(float(r)), "nan", "escape", "nan", diagram.mode])
        for e in scan.equilibria:
            w.writerow([repr(float(r)), repr(float(e.location)), e.stability, repr(float(e.residual)),
                        diagram.mode])


def write_summary_csv(diagram: BifurcationDiagram, stream, comments: Iterable[str] = ()) -> None:
    for line in comments:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["r_lo", "r_hi", "signature_before", "signature_after"])
    for b in diagram.detected_bifurcations:
        w.writerow([repr(b.r_lo), repr(b.r_hi), format_signature(b.before), format_signature(b.after)])
