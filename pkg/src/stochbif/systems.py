"""Scalar SDE systems dX = f(r, X) dt + sigma(X) dB with polynomial coefficients.

A coefficient list is a sequence of ``(power, const, rmul)`` triples, each
standing for the monomial ``(const + rmul * r) * x**power``.  The builtin
catalog keeps hand-written closed forms for evaluation (so they are exact)
and the equivalent coefficient lists for serialization.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, UnknownSystemError

__all__ = [
    "Term",
    "Polynomial",
    "SdeSystem",
    "BUILTIN_NAMES",
    "lookup_builtin",
    "parse_polynomial_system",
    "system_from_config",
]


@dataclass(frozen=True)
class Term:
    power: int
    const: float
    rmul: float = 0.0

    def as_list(self) -> list:
        return [self.power, self.const, self.rmul]


@dataclass(frozen=True)
class Polynomial:
    """Evaluates ``sum((const + rmul*r) * x**power)``; picklable, unlike closures."""

    terms: tuple[Term, ...]

    def __call__(self, r, x):
        x = np.asarray(x, dtype=float)
        r = np.asarray(r, dtype=float)
        out = np.zeros(np.broadcast(r, x).shape)
        for t in self.terms:
            if t.const == 0.0 and t.rmul == 0.0:
                continue
            out = out + (t.const + t.rmul * r) * x**t.power
        return out

    def as_lists(self) -> list[list]:
        return [t.as_list() for t in self.terms]


@dataclass(frozen=True)
class _Diffusion:
    poly: Polynomial

    def __call__(self, x):
        return self.poly(0.0, x)


def _coerce_terms(coeffs: Iterable, *, what: str) -> tuple[Term, ...]:
    terms = []
    seen = set()
    for entry in coeffs:
        if isinstance(entry, Term):
            power, const, rmul = entry.power, entry.const, entry.rmul
        else:
            try:
                power, const, rmul = entry
            except (TypeError, ValueError):
                raise ConfigError(
                    f"{what} entry {entry!r} is not a (power, const, rmul) triple"
                ) from None
        if isinstance(power, float) and power.is_integer():
            power = int(power)
        if isinstance(power, bool) or not isinstance(power, (int, np.integer)) or power < 0:
            raise ConfigError(f"{what} power {power!r} must be a nonnegative integer")
        const, rmul = float(const), float(rmul)
        if not (np.isfinite(const) and np.isfinite(rmul)):
            raise ConfigError(f"{what} coefficients must be finite, got {entry!r}")
        if power in seen:
            raise ConfigError(f"duplicate power {power} in {what} coefficients")
        seen.add(int(power))
        terms.append(Term(int(power), const, rmul))
    return tuple(sorted(terms, key=lambda t: t.power))


@dataclass(frozen=True)
class SdeSystem:
    """A parameterized scalar SDE.

    ``drift(r, x)`` and ``diffusion(x)`` accept scalars or arrays.  The
    diffusion is sigma, not sigma squared.  ``drift_spec``/``diffusion_spec``
    are None for systems built from arbitrary callables, which then cannot be
    written to a config file.
    """

    name: str
    drift_fn: Callable
    diffusion_fn: Callable
    drift_spec: tuple[Term, ...] | None = None
    diffusion_spec: tuple[Term, ...] | None = None

    def drift(self, r, x):
        return self.drift_fn(r, x)

    def diffusion(self, x):
        return self.diffusion_fn(x)

    @property
    def serializable(self) -> bool:
        return self.drift_spec is not None and self.diffusion_spec is not None

    def deterministic(self) -> "SdeSystem":
        """The same drift with the noise switched off."""
        return dataclasses.replace(
            self,
            name=self.name,
            diffusion_fn=_zero_diffusion,
            diffusion_spec=(),
        )

    def to_config(self) -> dict:
        if not self.serializable:
            raise ConfigError(f"system {self.name!r} has no polynomial form")
        return {
            "drift": [t.as_list() for t in self.drift_spec],
            "diffusion": [t.as_list() for t in self.diffusion_spec],
        }


def _zero_diffusion(x):
    return np.zeros_like(np.asarray(x, dtype=float))


# Builtin closed forms.  Module-level functions so systems pickle cleanly
# into worker processes.

def _saddle_node_drift(r, x):
    return r + x**2


def _transcritical_drift(r, x):
    return r * x - x**2


def _pitchfork_drift(r, x):
    return r * x - x**3


def _multiplicative(x):
    return 1.0 * np.asarray(x, dtype=float)


_CATALOG = {
    "saddle-node": (_saddle_node_drift, [(0, 0.0, 1.0), (2, 1.0, 0.0)]),
    "transcritical": (_transcritical_drift, [(1, 0.0, 1.0), (2, -1.0, 0.0)]),
    "pitchfork": (_pitchfork_drift, [(1, 0.0, 1.0), (3, -1.0, 0.0)]),
}
_SIGMA_X = [(1, 1.0, 0.0)]

BUILTIN_NAMES = tuple(_CATALOG)


def lookup_builtin(name: str) -> SdeSystem:
    """Return one of the three builtin systems, all with sigma(x) = x."""
    try:
        drift, drift_coeffs = _CATALOG[name]
    except KeyError:
        raise UnknownSystemError(
            f"unknown system {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"
        ) from None
    return SdeSystem(
        name=name,
        drift_fn=drift,
        diffusion_fn=_multiplicative,
        drift_spec=_coerce_terms(drift_coeffs, what="drift"),
        diffusion_spec=_coerce_terms(_SIGMA_X, what="diffusion"),
    )


def parse_polynomial_system(
    drift_coeffs: Sequence, diffusion_coeffs: Sequence, name: str = "polynomial"
) -> SdeSystem:
    drift = _coerce_terms(drift_coeffs, what="drift")
    diffusion = _coerce_terms(diffusion_coeffs, what="diffusion")
    if any(t.rmul != 0.0 for t in diffusion):
        raise ConfigError("diffusion coefficients cannot depend on r (rmul must be 0)")
    return SdeSystem(
        name=name,
        drift_fn=Polynomial(drift),
        diffusion_fn=_Diffusion(Polynomial(diffusion)),
        drift_spec=drift,
        diffusion_spec=diffusion,
    )


def system_from_config(cfg: dict) -> SdeSystem:
    """Build a system from ``system = "<name>"`` or ``drift``/``diffusion`` keys."""
    has_name = cfg.get("system") is not None
    has_poly = cfg.get("drift") is not None or cfg.get("diffusion") is not None
    if has_name and has_poly:
        raise ConfigError("give either 'system' or 'drift'/'diffusion', not both")
    if has_name:
        return lookup_builtin(cfg["system"])
    if has_poly:
        return parse_polynomial_system(cfg.get("drift") or [], cfg.get("diffusion") or [])
    raise ConfigError("no system given: set 'system' or 'drift'/'diffusion'")
