import math

import numpy as np
import pytest

from stochbif.equilibria import ScanConfig, default_domain, detect_equilibria, with_overrides
from stochbif.errors import ConfigError
from stochbif.systems import lookup_builtin, parse_polynomial_system

DEFAULT = ScanConfig()


def closed_form(name, r):
    """Real roots of f(r, x) = 0 with stability from the sign of f'(x)."""
    if name == "saddle-node":
        return [] if r > 0 else [(-math.sqrt(-r), "stable"), (math.sqrt(-r), "unstable")]
    if name == "transcritical":
        return sorted([(0.0, "stable" if r < 0 else "unstable"), (r, "unstable" if r < 0 else "stable")])
    if r <= 0:
        return [(0.0, "stable")]
    return [(-math.sqrt(r), "stable"), (0.0, "unstable"), (math.sqrt(r), "stable")]


def summary(scan):
    return [(e.location, e.stability) for e in scan.equilibria]


def assert_matches(scan, want, tol):
    got = summary(scan)
    assert [s for _, s in got] == [s for _, s in want], got
    for (x, _), (y, _) in zip(got, want):
        assert abs(x - y) <= tol, got


def test_deterministic_pitchfork():
    scan = detect_equilibria(lookup_builtin("pitchfork").deterministic(), 1.0, DEFAULT)
    assert_matches(scan, [(-1.0, "stable"), (0.0, "unstable"), (1.0, "stable")], 0.02)


def test_deterministic_transcritical():
    scan = detect_equilibria(lookup_builtin("transcritical").deterministic(), -1.0, DEFAULT)
    assert_matches(scan, [(-1.0, "unstable"), (0.0, "stable")], 0.02)
    assert any("escape" in n for n in scan.unstable()[0].notes)


def test_zero_system_is_degenerate():
    scan = detect_equilibria(parse_polynomial_system([], []), 0.0, with_overrides(DEFAULT, t_final=1.0, dt=1e-2))
    assert scan.equilibria == []
    assert "degenerate: continuum of equilibria" in scan.diagnostics


def test_stochastic_pitchfork():
    scan = detect_equilibria(lookup_builtin("pitchfork"), 1.0, DEFAULT)
    stable = scan.stable()
    assert len(stable) == 2 and len(scan.unstable()) == 1
    assert stable[0].location == pytest.approx(-stable[1].location, abs=DEFAULT.merge_tol)
    assert scan.unstable()[0].location == pytest.approx(0.0, abs=DEFAULT.merge_tol)
    # exact stationary mean on the positive half-line: Gamma(r) / Gamma(r - 1/2)
    assert stable[1].location == pytest.approx(1 / math.sqrt(math.pi), abs=DEFAULT.merge_tol)
    for e in stable:
        assert e.residual <= DEFAULT.settle_tol
        assert len(e.basin_sample) >= 2


@pytest.mark.parametrize("r", [0.5, 1.0])
def test_symmetry_under_negation(r):
    scan = detect_equilibria(lookup_builtin("pitchfork"), r, DEFAULT)
    locs = np.array([e.location for e in scan.equilibria])
    kinds = [e.stability for e in scan.equilibria]
    np.testing.assert_allclose(np.sort(-locs), locs, atol=DEFAULT.merge_tol)
    # The fan is symmetric, so terminal means must be odd in x0 as well.  This
    # keeps the check meaningful where nothing settles by T (r = 1/2 is the
    # asymptotic threshold of this system, where relaxation is only algebraic).
    by_x0 = {round(o.x0, 9): o for o in scan.outcomes}
    for o in scan.outcomes:
        mirror = by_x0[round(-o.x0, 9)]
        assert o.value == pytest.approx(-mirror.value, abs=DEFAULT.merge_tol)
        assert o.kind == mirror.kind
    assert kinds == kinds[::-1]
    at_zero = [e.stability for e in scan.equilibria if abs(e.location) <= DEFAULT.merge_tol]
    assert len(at_zero) <= 1


def test_determinism():
    cfg = with_overrides(DEFAULT, t_final=5.0, fan_size=7)
    a = detect_equilibria(lookup_builtin("pitchfork"), 1.0, cfg)
    b = detect_equilibria(lookup_builtin("pitchfork"), 1.0, cfg)
    assert repr(summary(a)) == repr(summary(b))
    assert repr(a.outcomes) == repr(b.outcomes)
    assert a.diagnostics == b.diagnostics


def test_locations_are_separated():
    scan = detect_equilibria(lookup_builtin("pitchfork"), 1.0, DEFAULT)
    locs = [e.location for e in scan.equilibria]
    assert locs == sorted(locs)
    assert np.all(np.diff(locs) >= DEFAULT.merge_tol)


@pytest.mark.parametrize("name", ["saddle-node", "transcritical", "pitchfork"])
@pytest.mark.parametrize("r", [-1.0, -0.5, 0.5, 1.0])
def test_deterministic_limit_fidelity(name, r):
    scan = detect_equilibria(lookup_builtin(name).deterministic(), r, DEFAULT)
    assert_matches(scan, closed_form(name, r), 2 * DEFAULT.merge_tol)


def test_saddle_node_conditioned_state():
    scan = detect_equilibria(lookup_builtin("saddle-node"), 1.0, DEFAULT)
    assert scan.grid.policy == "absorbing"
    (eq,) = scan.equilibria
    assert eq.stability == "stable" and eq.location > 0 and eq.conditioned
    assert any("truncation-dependent" in n for n in eq.notes)


def test_stochastic_saddle_node_negative_r_matches_bessel_mean():
    # On x < 0 the stationary density is proportional to x^-2 exp(2x - 2r/x); its
    # mean is -sqrt(|r|) K0(4 sqrt|r|) / K1(4 sqrt|r|).
    from scipy.special import k0, k1

    scan = detect_equilibria(lookup_builtin("saddle-node"), -1.0, DEFAULT)
    (eq,) = scan.stable()
    assert eq.location == pytest.approx(-k0(4.0) / k1(4.0), abs=DEFAULT.merge_tol)


def test_default_domains():
    assert default_domain(lookup_builtin("pitchfork"), 1.0) == (-6.0, 6.0, "reflecting")
    lo, hi, policy = default_domain(lookup_builtin("saddle-node"), 4.0)
    assert (lo, hi, policy) == (-11.0, 11.0, "absorbing")
    assert default_domain(lookup_builtin("saddle-node").deterministic(), 4.0)[2] == "reflecting"


def test_merge_tol_scales_with_coarse_grids():
    cfg = with_overrides(DEFAULT, n=600)
    grid = cfg.grid_for(lookup_builtin("pitchfork"), 1.0)
    assert cfg.merge_tol_for(grid) == pytest.approx(0.04)
    assert DEFAULT.merge_tol_for(DEFAULT.grid_for(lookup_builtin("pitchfork"), 1.0)) == 0.02


@pytest.mark.parametrize("kw", [{"fan": (0.0, 1.0)}, {"fan_size": 3}, {"settle_tol": 0.0}, {"dt": 50.0}])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        detect_equilibria(lookup_builtin("pitchfork"), 1.0, with_overrides(DEFAULT, **kw))
