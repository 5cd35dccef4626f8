import numpy as np
import pytest

from fbmcf import flow as fl
from fbmcf import geometry as geo
from fbmcf import inequalities as iq
from fbmcf.exceptions import DegenerateInputError, PreconditionError


@pytest.fixture(scope="module")
def half_sphere_run():
    return fl.run(fl.FlowConfig(), geo.half_sphere(1.0, 48))


# -- trace and Sobolev ratios --------------------------------------------------
def test_trace_ratio_constant_on_unit_half_sphere():
    # boundary 2 pi, bulk int |H| = 4 pi, int 1 = 2 pi: ratio 2pi / 6pi
    c = geo.half_sphere(1.0, 256)
    assert iq.trace_ratio(c, np.ones(c.n_nodes)) == pytest.approx(1 / 3, rel=1e-3)


def test_sobolev_constant_on_unit_half_sphere():
    c = geo.half_sphere(1.0, 256)
    v = np.ones(c.n_nodes)
    # ||1||_2 = sqrt(2 pi); rhs = ||H||_1 + ||1||_1 = 6 pi
    assert iq.sobolev_ratio(c, v, p=1.0) == pytest.approx(np.sqrt(2 * np.pi) / (6 * np.pi), rel=1e-3)
    # cor24 with q = 1: sqrt(2pi) / (sqrt(2pi) * 3 sqrt(2pi))
    assert iq.sobolev_ratio(c, v, mode="cor24", q=1.0) == pytest.approx(
        1 / (3 * np.sqrt(2 * np.pi)), rel=1e-3)


def test_zero_function_is_degenerate():
    c = geo.half_sphere(1.0, 64)
    with pytest.raises(DegenerateInputError):
        iq.trace_ratio(c, np.zeros(c.n_nodes))
    with pytest.raises(DegenerateInputError):
        iq.sobolev_ratio(c, np.zeros(c.n_nodes))


@pytest.mark.parametrize("kw", [{"p": 2.0}, {"p": 0.5}, {"mode": "cor24", "q": 0.5}, {"mode": "x"}])
def test_sobolev_preconditions(kw):
    c = geo.half_sphere(1.0, 64)
    with pytest.raises(PreconditionError):
        iq.sobolev_ratio(c, np.ones(c.n_nodes), **kw)


def test_trace_needs_barrier_boundary():
    with pytest.raises(PreconditionError):
        iq.trace_ratio(geo.circle(1.0, 32), np.ones(32))


def test_family_has_fifty_members():
    fam = iq.TestFunctionFamily()
    assert len(fam) == 50 and len(set(fam.names())) == 50
    c = geo.spherical_cap(0.7, 64)
    vals = fam.evaluate(c)
    assert all(v.shape == (c.n_nodes,) and np.all(np.isfinite(v)) for _, v in vals)


@pytest.mark.parametrize("ratio", [iq.trace_ratio, iq.sobolev_ratio])
def test_family_sup_finite_on_cap(ratio):
    c = geo.perturbed_cap(0.8, (0.02,), 96)
    sup, name, vals = iq.family_sup(c, ratio)
    assert np.isfinite(sup) and sup == max(vals.values()) and vals[name] == sup


def test_family_sup_skips_degenerate_members_on_disk():
    d = geo.equatorial_disk(64)
    sup, _, vals = iq.family_sup(d, iq.trace_ratio)
    assert np.isfinite(sup) and len(vals) < 50


# -- area ----------------------------------------------------------------------
def test_area_monotone_along_half_sphere(half_sphere_run):
    out = iq.area_monotonicity(half_sphere_run)
    assert out["monotone"]
    assert np.nanmax(out["residual"]) < 0.05


def test_area_constant_on_disk():
    tr = fl.run(fl.FlowConfig(max_time=0.5, steady_tol=0.0, snapshot_dt=0.1), geo.equatorial_disk(64))
    out = iq.area_monotonicity(tr)
    assert out["max_increase"] < 1e-10
    assert np.all(np.isnan(out["residual"]))


# -- Stampacchia side ----------------------------------------------------------
@pytest.mark.parametrize("kw", [{"p": 4.0}, {"sigma": 0.5}, {"beta": 0.0},
                                {"functional": "convex"}, {"k_levels": 1}])
def test_stampacchia_config_validation(kw):
    with pytest.raises(PreconditionError):
        iq.StampacchiaConfig(**kw)


def test_stampacchia_default_sigma():
    assert iq.StampacchiaConfig(p=16.0).sigma == pytest.approx(0.125)


def test_level_set_measures_nested():
    rng = np.random.default_rng(0)
    fields = [rng.random(30) for _ in range(4)]
    weights = [rng.random(30) for _ in range(4)]
    levels = np.linspace(0, 1, 12)
    m = iq.level_set_measures([0.0, 0.1, 0.3, 0.4], fields, weights, levels)
    assert np.all(np.diff(m) <= 0)
    zero = iq.level_set_measures([0.0, 1.0], [np.zeros(5)] * 2, [np.ones(5)] * 2, [0.5, 1.0])
    np.testing.assert_array_equal(zero, 0.0)


def test_fit_stampacchia_envelope_holds_on_every_pair():
    levels = np.linspace(0.0, 0.9, 15)
    meas = np.exp(-3.0 * levels)
    out = iq.fit_stampacchia(levels, meas)
    assert np.isfinite(out["alpha"]) and out["n_pairs"] == 15 * 14 // 2
    i, j = np.triu_indices(levels.size, 1)
    lhs = (levels[j] - levels[i]) ** out["beta"] * meas[j]
    assert np.all(lhs <= out["C"] * meas[i] ** out["alpha"] * (1 + 1e-9))


def test_fit_stampacchia_needs_pairs():
    with pytest.raises(PreconditionError):
        iq.fit_stampacchia([0.1, 0.2, 0.3], [1.0, 0.5, 0.0])


def test_holder_check_nonpositive():
    c = geo.perturbed_cap(0.8, (0.03,), 96)
    rng = np.random.default_rng(1)
    f = rng.random(c.n_nodes) ** 3
    H = geo.fundamental_forms(c).H
    assert iq.holder_check(c, f, H, ((1.0, 1.0), (2.0, 0.5), (10.0, 1.5)), 20.0) <= 1e-12
    assert iq.holder_check(c, np.zeros(c.n_nodes), H, ((1.0, 1.0),), 20.0) == -1.0


def test_star_monitor_runs(half_sphere_run):
    out = iq.star_monitor(half_sphere_run, iq.StampacchiaConfig(p=8.0))
    assert out["t"].size == len(half_sphere_run.snapshots)
    assert out["nested"]
    assert out["holder"] <= 1e-12
