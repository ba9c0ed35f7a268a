import csv
import io
import math

import numpy as np
import pytest

from stochbif import ScanConfig, lookup_builtin, sweep
from stochbif.bifurcation import changes, format_signature, write_diagram_csv, write_summary_csv
from stochbif.equilibria import with_overrides
from stochbif.errors import ConfigError

from test_equilibria import closed_form

QUICK = with_overrides(ScanConfig(), t_final=60.0, dt=0.01, fan_size=11)
# noiseless orbits approach roots near cell faces slowly, so deterministic sweeps get a long horizon
DET = with_overrides(QUICK, t_final=300.0)


def signature(want):
    return (len(want), tuple(sorted(s for _, s in want)))


def test_invalid_sweeps():
    pf = lookup_builtin("pitchfork")
    for args in [(1.0, 0.0, 5), (0.0, 1.0, 1), (0.0, 1.0, 2.5), (0.0, math.inf, 5)]:
        with pytest.raises(ConfigError):
            sweep(pf, "deterministic", *args, config=QUICK)
    with pytest.raises(ConfigError):
        sweep(pf, "sideways", 0.0, 1.0, 3, config=QUICK)
    with pytest.raises(ConfigError):
        sweep(pf, "deterministic", 0.0, 1.0, 3, config=QUICK, refine_width=0.0)


def test_format_signature():
    assert format_signature((3, ("stable", "stable", "unstable"))) == "3:stable+stable+unstable"
    assert format_signature((0, ())) == "0:none"


@pytest.mark.parametrize("name", ["saddle-node", "transcritical", "pitchfork"])
def test_deterministic_diagrams_match_roots(deterministic_sweeps, name):
    d = deterministic_sweeps[name]
    assert np.all(np.diff(d.r_values) > 0) and len(d.scans) == d.r_values.size
    for r, scan in zip(d.r_values, d.scans):
        want = closed_form(name, r)
        got = [(e.location, e.stability) for e in scan.equilibria]
        assert [s for _, s in got] == [s for _, s in want], (r, got)
        assert all(abs(x - y) <= 0.04 for (x, _), (y, _) in zip(got, want)), (r, got)
        assert scan.signature == signature(want)
    for b in d.detected_bifurcations:
        assert b.before != b.after


def test_deterministic_pitchfork_flags_zero(deterministic_sweeps):
    (b,) = deterministic_sweeps["pitchfork"].detected_bifurcations
    assert b.r_lo < 0 < b.r_hi
    assert format_signature(b.before) == "1:stable"
    assert format_signature(b.after) == "3:stable+stable+unstable"


def test_transcritical_exchange_of_stability_is_not_a_signature_change(deterministic_sweeps):
    # The two roots swap stability at r = 0, but the (count, sorted labels) signature is unchanged.
    assert deterministic_sweeps["transcritical"].detected_bifurcations == []


def test_stochastic_pitchfork_example(stochastic_pitchfork_sweep):
    d = stochastic_pitchfork_sweep
    first = d.detected_bifurcations[0]
    assert first.r_lo <= 0.1 <= first.r_hi
    assert format_signature(first.before) == "1:stable"
    for r, scan in zip(d.r_values, d.scans):
        if r <= 0.0:
            (e,) = scan.equilibria
            assert e.stability == "stable" and abs(e.location) <= 0.02
    at_one = d.scan_at(1.0)
    assert [e.stability for e in at_one.equilibria] == ["stable", "unstable", "stable"]


def test_stochastic_transcritical_regimes(stochastic_transcritical_sweep):
    d = stochastic_transcritical_sweep
    unsettled = [r for r in d.r_values if any("unsettled" in a for a in d.annotations.get(float(r), []))]
    for r, scan in zip(d.r_values, d.scans):
        if r <= -2.5:
            # every orbit, from either side, settles onto the single mean state at 0
            (e,) = scan.equilibria
            assert e.stability == "stable" and abs(e.location) <= 0.02
            assert r not in unsettled
        if r >= 1.0:
            lo, hi = scan.equilibria
            assert lo.stability == "unstable" and abs(lo.location) <= 0.05
            assert hi.stability == "stable" and hi.location == pytest.approx(r - 0.5, abs=0.02)
    # above r ~ -2.4 orbits from the negative side stop settling within the horizon
    assert min(unsettled) == pytest.approx(-2.25)
    last = d.detected_bifurcations[-1]
    assert (last.r_lo, last.r_hi) == pytest.approx((0.75, 1.0))
    assert format_signature(last.after) == "2:stable+unstable"


@pytest.mark.xfail(strict=True, reason="reflecting walls: negative-side orbits drift back toward 0 instead of "
                                       "settling on a negative mean state, so no signature change appears near -3")
def test_stochastic_transcritical_change_near_minus_three(stochastic_transcritical_sweep):
    d = stochastic_transcritical_sweep
    assert any(b.r_lo <= -2.0 and b.r_hi >= -4.0 for b in d.detected_bifurcations)


def test_refinement_narrows_to_width():
    d = sweep(lookup_builtin("saddle-node"), "deterministic", -1.0, 0.9, 3, DET, refine_width=0.15)
    assert d.r_values.size > 3
    (b,) = d.detected_bifurcations
    assert b.r_hi - b.r_lo <= 0.15 and b.r_lo < 0 < b.r_hi


def test_monotone_refinement():
    sn = lookup_builtin("saddle-node")
    coarse = sweep(sn, "deterministic", -1.0, 0.8, 4, DET)
    fine = sweep(sn, "deterministic", -1.0, 0.8, 7, DET)
    assert all(np.isclose(fine.r_values, r).any() for r in coarse.r_values)
    assert coarse.detected_bifurcations
    for b in coarse.detected_bifurcations:
        assert any(b.r_lo - 1e-12 <= f.r_lo and f.r_hi <= b.r_hi + 1e-12 for f in fine.detected_bifurcations)


def test_changes_requires_differing_signatures(deterministic_sweeps):
    d = deterministic_sweeps["saddle-node"]
    assert changes(d.r_values, d.scans) == d.detected_bifurcations
    for b in d.detected_bifurcations:
        lo = d.scan_at(b.r_lo).signature
        hi = d.scan_at(b.r_hi).signature
        assert lo != hi


def test_csv_outputs(deterministic_sweeps):
    d = deterministic_sweeps["saddle-node"]
    buf = io.StringIO()
    write_diagram_csv(d, buf, ["system = 'saddle-node'"])
    text = buf.getvalue()
    assert text.startswith("# system = 'saddle-node'\nr,location,stability,residual,mode\n")
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    empty = [row for row in rows if float(row["r"]) > 0]
    assert empty and all(row["stability"] == "escape" and math.isnan(float(row["location"])) for row in empty)
    assert {row["mode"] for row in rows} == {"deterministic"}
    buf = io.StringIO()
    write_summary_csv(d, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "r_lo,r_hi,signature_before,signature_after"
    assert lines[1].endswith(",2:stable+unstable,0:none")
