import numpy as np
import pytest
from scipy import integrate

from nlsmulti import diagnostics as dg
from nlsmulti.errors import ConfigError
from nlsmulti.grid import make_grid
from nlsmulti.projections import SpectralLibrary, random_test_fields
from nlsmulti.solitons import (MultiSolitonConfig, SolitonParams, ground_state, multi_soliton,
                               single)


def phi_exact(x, alpha=1.0, k=3.0):
    return alpha ** (1 / k) * (k + 1) ** (1 / (2 * k)) / np.cosh(k * alpha * x) ** (1 / k)


def test_conserved_quantities_against_quadrature(grid):
    v = 0.6
    psi = multi_soliton(single(v=v), 0.0, grid.x)
    mass, energy, mom = dg.conserved_quantities(psi, 3.0, grid)
    m_ref = integrate.quad(lambda x: phi_exact(x) ** 2, -np.inf, np.inf, epsabs=0, epsrel=1e-13)[0]
    assert abs(mass - m_ref) < 1e-12
    assert abs(mom - v / 2 * m_ref) < 1e-12
    # energy of the moving wave = ground-state energy + v^2/4 * mass
    e0 = dg.conserved_quantities(ground_state(1.0, 3.0, grid.x), 3.0, grid)[1]
    assert abs(energy - (e0 + v ** 2 / 4 * m_ref)) < 1e-11


def test_fit_decay_exponent_exact_power():
    t = np.linspace(0, 40, 200)
    fit = dg.fit_decay_exponent(t, 3.0 * (1 + t) ** -0.75, (2, 30))
    assert abs(fit.exponent + 0.75) < 1e-12
    assert abs(fit.intercept - np.log(3.0)) < 1e-12
    assert fit.r2 == pytest.approx(1.0)
    pure = dg.fit_decay_exponent(t[1:], t[1:] ** -0.5, (1, 40), time_offset=0.0)
    assert abs(pure.exponent + 0.5) < 1e-12


def test_fit_decay_exponent_rejects_bad_input():
    t = np.linspace(0, 10, 50)
    with pytest.raises(ConfigError):
        dg.fit_decay_exponent(t, np.ones_like(t), (9.5, 10))
    with pytest.raises(ConfigError):
        dg.fit_decay_exponent(t, np.zeros_like(t))
    with pytest.raises(ConfigError):
        dg.fit_decay_exponent(t, np.ones_like(t), (0, 10), time_offset=0.0)


def test_fit_exponential_rate():
    s = np.linspace(0, 10, 20)
    r, c = dg.fit_exponential_rate(s, 2.5 * np.exp(-1.3 * s))
    assert abs(r - 1.3) < 1e-12 and abs(c - 2.5) < 1e-12


def test_interaction_field_matches_direct_difference(grid):
    p1, p2 = SolitonParams(0.3, 2.0, 1.0, 0.0), SolitonParams(-0.3, -2.0, 1.2, 1.0)
    q1 = multi_soliton(MultiSolitonConfig([p1]), 0.0, grid.x)
    q2 = multi_soliton(MultiSolitonConfig([p2]), 0.0, grid.x)
    direct = dg.nonlinearity(q1 + q2, 3) - dg.nonlinearity(q1, 3) - dg.nonlinearity(q2, 3)
    assert np.max(np.abs(dg.interaction_field(q1, q2, 3) - direct)) < 1e-13


def test_interaction_field_no_cancellation_at_large_separation(grid):
    q1 = ground_state(1.0, 3.0, grid.x, 15.0)
    q2 = ground_state(1.0, 3.0, grid.x, -15.0)
    d = dg.interaction_field(q1, q2, 3)
    # leading term at the left soliton: -(2k+1)|q2|^{2k} q1 (real fields)
    ref = -7 * q2 ** 6 * q1
    sel = np.abs(grid.x + 15) < 2
    np.testing.assert_allclose(d[sel], ref[sel], rtol=1e-6)


def test_interaction_scan_rates():
    seps = np.linspace(10, 35, 11)
    g = dg.scan_grid(seps, 1.0, 80 / 2048)
    rep = dg.interaction_scan(3.0, 1.0, seps, g)
    assert rep.passed
    assert rep.measured["dropped"] == 0
    assert abs(rep.measured["rate_l2"] - 1.0) < 0.01
    assert len(rep.table) == 11


def test_interaction_scan_drops_truncated_separations(grid):
    rep = dg.interaction_scan(3.0, 1.0, np.linspace(10, 35, 11), grid)
    assert rep.measured["dropped"] == 2


def test_interaction_scan_min_alpha_sets_rate():
    seps = np.linspace(10, 30, 9)
    g = dg.scan_grid(seps, 0.8, 0.04)
    rep = dg.interaction_scan(3.0, 1.0, seps, g, alpha2=0.8)
    assert 0.9 * 0.8 <= rep.measured["rate_l2"] <= 1.1 * 0.8


def test_interactt_closed_form():
    for a, b in ((1.0, 1.0), (1.0, 2.0), (2.5, 0.7)):
        for z in (0.1, 1.0, 7.0):
            val, _ = dg.interactt_integral(a, b, 0, z)
            ref = dg.interactt_closed_form_m0(a, b, z)
            assert abs(val - ref) <= 1e-10 * ref


def test_verify_interactt_branches():
    eq = dg.verify_interactt(1.0, 1.0, 2)
    ne = dg.verify_interactt(1.0, 2.0, 2)
    assert eq.passed and eq.measured["branch"] == "equal"
    assert ne.passed and ne.measured["branch"] == "distinct"


def test_interactt_majorant_failure_detected():
    # a majorant without the zeta^{m+1} factor in the equal branch must fail
    orig = dg.interactt_majorant
    try:
        dg.interactt_majorant = lambda a, b, m, z: np.exp(-a * z)
        assert not dg.verify_interactt(1.0, 1.0, 2).passed
    finally:
        dg.interactt_majorant = orig


def test_verify_interpol_log_branch_and_closed_form():
    rep = dg.verify_interpol(1.5, 1.0)
    assert rep.passed and rep.measured["branch"] == "beta=1"
    cf = dg.verify_interpol(0.0, 0.0, (1.0, 10.0, 100.0))
    assert cf.measured["closed_form_rel_err"] <= 1e-10


def test_interpol_wrong_envelope_fails():
    orig = dg.interpol_envelope
    try:
        # dropping the log on the beta = 1 branch breaks the two-sided bound
        dg.interpol_envelope = lambda a, b, t: max(1 / (1 + t), (1 + t) ** (-a))
        assert not dg.verify_interpol(0.5, 1.0).passed
    finally:
        dg.interpol_envelope = orig


def test_lemma_suite_passes():
    reports = dg.lemma_suite()
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_input_validation():
    with pytest.raises(ConfigError):
        dg.verify_interactt(-1.0, 1.0, 1)
    with pytest.raises(ConfigError):
        dg.verify_interpol(1.0, 1.0, (0.0, 1.0))


def test_tolerance_table_is_used():
    orig = dict(dg.TOLERANCES)
    try:
        dg.TOLERANCES["interactt_tail_growth"] = 1e-30
        assert not dg.verify_interactt(1.0, 2.0, 2).passed
    finally:
        dg.TOLERANCES.clear()
        dg.TOLERANCES.update(orig)


def test_affine_envelope_check():
    t = np.linspace(0, 20, 41)
    assert dg.affine_envelope_check(t, 1 + 0.3 * t + 0.1 * np.sin(t)).passed
    assert not dg.affine_envelope_check(t, 1 + 0.3 * t ** 2).passed


def test_virial_moments_single(grid):
    u = np.stack([np.exp(-grid.x ** 2), np.exp(-grid.x ** 2)])
    m = dg.virial_moments(u, single(), 0.0, grid)
    ref = np.sqrt(2 * integrate.quad(lambda x: x ** 2 * np.exp(-2 * x ** 2), -np.inf, np.inf)[0])
    assert abs(m[0] - ref) < 1e-10


def test_virial_growth_short_run(library, grid):
    cfg = MultiSolitonConfig([SolitonParams(0.4, 10.0, 1.0, 0.3), SolitonParams(-0.4, -10.0, 1.0, -0.2)])
    rep = dg.virial_growth(cfg, grid, library, t_end=4.0, record_every=0.25)
    assert len(rep.table) == 17
    assert np.all(np.isfinite(np.array(rep.table)))


def test_flow_commutation_single_soliton():
    g = make_grid(80.0, 2048)
    lib = SpectralLibrary.compute(0.5, 3.0, g)
    cfg = single(alpha=0.5, v=0.4, y=5.0, gamma=0.3)
    fs = random_test_fields(g, 1, seed=3, centers=(5.0,))
    rep = dg.flow_commutation(cfg, g, fs, lib, which="c", t_end=1.0)
    assert rep.passed
    assert rep.measured["defect"] < 1e-4
