"""Euler-Maruyama ensembles: an independent estimate of mean orbits.

Paths are split into fixed-size blocks.  Block b draws its normals from
``default_rng([seed, b])``, so the result does not depend on how blocks are
scheduled, and block sums are combined in block order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fpe import step_count
from .orbits import MeanOrbit
from .systems import SdeSystem

MIN_PATHS = 100


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    t_final: float = 5.0
    seed: int = 0
    domain_clip: float = 6.0
    sample_stride: int = 100
    block_size: int = 10_000

    def validate(self) -> None:
        if int(self.n_paths) != self.n_paths or self.n_paths < MIN_PATHS:
            raise ConfigError(f"n_paths must be an integer >= {MIN_PATHS}, got {self.n_paths}")
        step_count(self.t_final, self.dt)
        if not self.domain_clip > 0:
            raise ConfigError(f"domain_clip must be positive, got {self.domain_clip}")
        if self.sample_stride < 1 or self.block_size < 1:
            raise ConfigError("sample_stride and block_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def _sample_steps(nsteps: int, stride: int) -> np.ndarray:
    steps = np.arange(0, nsteps + 1, stride)
    if steps[-1] != nsteps:
        steps = np.append(steps, nsteps)
    return steps


def _run_block(system, r, x0, n, nsteps, dt, clip, samples, rng):
    """Per-sample (count, mean, centered sum of squares) over the block's surviving paths."""
    x = np.full(n, float(x0))
    alive = np.ones(n, dtype=bool)
    cnt = np.zeros(samples.size)
    mu = np.zeros(samples.size)
    m2 = np.zeros(samples.size)
    sqdt = math.sqrt(dt)
    j = 0
    for k in range(nsteps + 1):
        if k == samples[j]:
            xa = x[alive]
            cnt[j] = xa.size
            if xa.size:
                mu[j] = xa.mean()
                m2[j] = ((xa - mu[j]) ** 2).sum()
            j += 1
            if k == nsteps:
                break
        z = rng.standard_normal(n)
        with np.errstate(over="ignore", invalid="ignore"):
            step = np.asarray(system.drift(r, x), dtype=float) * dt + np.asarray(system.diffusion(x), dtype=float) * sqdt * z
            x = np.where(alive, x + step, x)  # clipped paths stay frozen
            alive &= np.isfinite(x) & (np.abs(x) <= clip)
    return cnt, mu, m2


def _merge(a, b):
    """Chan et al. pairwise update of (count, mean, M2)."""
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    safe = np.where(n > 0, n, 1.0)
    delta = mb - ma
    mean = ma + delta * nb / safe
    m2 = qa + qb + delta**2 * na * nb / safe
    return n, mean, m2


def em_mean_orbit(system: SdeSystem, r: float, x0: float, config: EnsembleConfig | None = None) -> MeanOrbit:
    """Ensemble mean over surviving paths, with its standard error.

    ``surviving_mass`` holds the surviving fraction.  Samples after every
    path has been clipped are dropped and the orbit is marked truncated.
    """
    cfg = config or EnsembleConfig()
    cfg.validate()
    if not abs(x0) < cfg.domain_clip:
        raise ConfigError(f"x0 = {x0} lies outside the clip range +-{cfg.domain_clip}")
    nsteps = step_count(cfg.t_final, cfg.dt)
    samples = _sample_steps(nsteps, cfg.sample_stride)
    acc = (np.zeros(samples.size),) * 3
    nblocks = -(-cfg.n_paths // cfg.block_size)
    for b in range(nblocks):
        n = min(cfg.block_size, cfg.n_paths - b * cfg.block_size)
        rng = np.random.default_rng([cfg.seed, b])
        acc = _merge(acc, _run_block(system, r, x0, n, nsteps, cfg.dt, cfg.domain_clip, samples, rng))

    cnt, mean, m2 = acc
    keep = cnt > 0
    truncated = not keep.all()
    cnt, mean, m2 = cnt[keep], mean[keep], m2[keep]
    var = m2 / np.maximum(cnt - 1, 1)
    frac = cnt / cfg.n_paths
    return MeanOrbit(
        x0=float(x0),
        r=float(r),
        times=samples[keep] * cfg.dt,
        means=mean,
        surviving_mass=frac,
        conditioned=bool(frac[-1] < 1.0) or truncated,
        truncated=truncated,
        stderr=np.sqrt(var / cnt),
    )
