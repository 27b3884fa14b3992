"""Chain driver: integrator equivalence, determinism, accounting, oracles."""

import math

import numpy as np
import pytest

from splithmc import (
    HmcConfig,
    NonFiniteStateError,
    catalog,
    double_well,
    expected_energy_error_harmonic,
    gaussian_chain,
    hmc_run,
    integrate,
    jitter_averaged_energy_error,
    make_rng,
)
from splithmc.harmonic import InstabilityError, diagnostics
from splithmc.hmc import hamiltonian


def test_hamiltonian():
    t = gaussian_chain(2)
    q = np.array([1.0, 0.5])
    p = np.array([2.0, 0.0])
    # V = (1*1 + 4*0.25)/2 = 1, K = 2
    assert hamiltonian(t, q, p) == pytest.approx(3.0, rel=1e-15)


def test_fused_and_python_paths_agree_bitwise():
    # The numba kernel must be arithmetically identical to the numpy path,
    # not merely close: acceptance decisions compare against shared
    # uniforms, so a one-ulp drift could flip a decision.
    rng = make_rng(42)
    for name in ("VV", "PV", "MINRHO3", "MINRHO4"):
        scheme = catalog(name)
        t1 = gaussian_chain(16)
        t2 = gaussian_chain(16)
        q = t1.sample_exact(rng)
        p = rng.standard_normal(16)
        qa, pa = integrate(scheme, t1, q, p, 0.05, 20, fast=False)
        qb, pb = integrate(scheme, t2, q, p, 0.05, 20, fast=True)
        assert np.array_equal(qa, qb)
        assert np.array_equal(pa, pb)
        assert t1.gradient_evaluations == t2.gradient_evaluations


def test_fast_path_needs_diagonal_gaussian():
    with pytest.raises(ValueError, match="fast"):
        integrate(catalog("VV"), double_well(), np.zeros(1), np.ones(1),
                  0.1, 1, fast=True)


def test_integrate_raises_on_blowup():
    with pytest.raises(NonFiniteStateError) as info:
        integrate(catalog("VV"), gaussian_chain(4), np.ones(4), np.ones(4),
                  1000.0, 50)
    assert 0 <= info.value.step < 50


def test_integrate_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        integrate(catalog("VV"), gaussian_chain(4), np.ones(3), np.ones(4), 0.1, 1)


def test_config_validation():
    good = dict(h0=0.1, steps_per_proposal=4, chain_length=10)
    HmcConfig(**good)
    for bad in (
        dict(good, h0=0.0),
        dict(good, h0=math.inf),
        dict(good, jitter=1.0),
        dict(good, jitter=-0.1),
        dict(good, steps_per_proposal=0),
        dict(good, chain_length=0),
        dict(good, burn_in=-1),
    ):
        with pytest.raises(ValueError):
            HmcConfig(**bad)


def test_start_shape_mismatch():
    cfg = HmcConfig(h0=0.1, steps_per_proposal=2, chain_length=5,
                    start=np.zeros(3))
    with pytest.raises(ValueError, match="start"):
        hmc_run(catalog("VV"), gaussian_chain(4), cfg)


def test_chain_is_deterministic_in_seed_and_stream():
    cfg = HmcConfig(h0=0.25, steps_per_proposal=8, chain_length=60, seed=5)
    a = hmc_run(catalog("MINRHO2"), gaussian_chain(8), cfg)
    b = hmc_run(catalog("MINRHO2"), gaussian_chain(8), cfg)
    assert a.accepted_fraction == b.accepted_fraction
    assert a.mean_energy_error == b.mean_energy_error
    c = hmc_run(catalog("MINRHO2"), gaussian_chain(8),
                HmcConfig(h0=0.25, steps_per_proposal=8, chain_length=60,
                          seed=5, stream=1))
    assert c.mean_energy_error != a.mean_energy_error


def test_gradient_accounting_drift_first():
    scheme = catalog("MINRHO3")
    t = gaussian_chain(6)
    cfg = HmcConfig(h0=0.1, steps_per_proposal=7, chain_length=20, burn_in=5)
    res = hmc_run(scheme, t, cfg)
    assert res.gradient_evaluations == scheme.stage_count * 7 * 25
    assert res.n_proposals == 20


def test_gradient_accounting_kick_first_pays_one_seed():
    scheme = catalog("VV")
    t = gaussian_chain(6)
    cfg = HmcConfig(h0=0.1, steps_per_proposal=7, chain_length=20)
    res = hmc_run(scheme, t, cfg)
    assert res.gradient_evaluations == 7 * 20 + 1


def test_huge_finite_energy_error_is_rejected_not_divergent():
    # h0 = 80 amplifies the state to ~1e99 in 20 steps: delta is finite
    # (so not a divergence) but astronomically positive, so every proposal
    # is rejected on the exp(-delta) coin.
    cfg = HmcConfig(h0=80.0, steps_per_proposal=20, chain_length=30, seed=2)
    res = hmc_run(catalog("VV"), gaussian_chain(3), cfg)
    assert res.divergent_proposals == 0
    assert res.accepted_fraction == 0.0
    assert res.mean_energy_error > 1e100


def test_divergent_proposals_all_rejected():
    # h0 = 1e8 overflows the state itself within ~19 steps, which the
    # driver must count as divergences and reject.
    cfg = HmcConfig(h0=1e8, steps_per_proposal=40, chain_length=30, seed=2)
    res = hmc_run(catalog("VV"), gaussian_chain(3), cfg)
    assert res.divergent_proposals == 30
    assert res.accepted_fraction == 0.0
    assert math.isnan(res.mean_energy_error)
    assert math.isnan(res.mean_squared_energy_error)
    doc = res.as_dict()
    assert doc["mean_energy_error"] is None


def test_records():
    cfg = HmcConfig(h0=0.3, steps_per_proposal=5, chain_length=12, burn_in=3,
                    jitter=0.2, seed=9)
    res = hmc_run(catalog("PV"), gaussian_chain(4), cfg, record=True)
    assert len(res.per_step_records) == 12
    for rec in res.per_step_records:
        assert 0.3 * 0.8 <= rec.h_used <= 0.3 * 1.2
        assert rec.accepted in (True, False)
    assert [r.step for r in res.per_step_records] == list(range(12))
    # without record the tuple is absent
    res2 = hmc_run(catalog("PV"), gaussian_chain(4), cfg)
    assert res2.per_step_records is None


def test_zero_jitter_uses_h0_exactly():
    cfg = HmcConfig(h0=0.4, steps_per_proposal=3, chain_length=6, jitter=0.0)
    res = hmc_run(catalog("PV"), gaussian_chain(2), cfg, record=True)
    assert all(rec.h_used == 0.4 for rec in res.per_step_records)


def test_expected_energy_error_formula():
    scheme = catalog("VV")
    h, steps = 0.3, 5
    ref = 0.0
    for w in (1.0, 2.0):
        d = diagnostics(scheme, w * h)
        ref += math.sin(steps * d.theta) ** 2 * d.rho
    got = expected_energy_error_harmonic(scheme, h, steps, [1.0, 2.0])
    assert math.isclose(got, ref, rel_tol=1e-14)
    with pytest.raises(InstabilityError):
        expected_energy_error_harmonic(scheme, 0.7, steps, [1.0, 3.0])


def test_jitter_average_matches_brute_force():
    scheme = catalog("VV")
    h0, steps, jitter = 0.3, 7, 0.15
    omegas = [1.0, 2.0]
    got = jitter_averaged_energy_error(scheme, h0, steps, omegas, jitter)
    us = np.linspace(-jitter, jitter, 4001)
    vals = [expected_energy_error_harmonic(scheme, h0 * (1.0 + u), steps, omegas)
            for u in us]
    ref = float(np.trapezoid(vals, us)) / (2.0 * jitter)
    assert math.isclose(got, ref, rel_tol=1e-6)


def test_jitter_average_equidistributed_phase():
    # With thousands of phase periods swept, the sin^2 factor averages to
    # 1/2 and the result must approach half the jitter-averaged rho.
    scheme = catalog("VV")
    h0, steps, jitter = 0.3, 5000, 0.2
    got = jitter_averaged_energy_error(scheme, h0, steps, [1.0], jitter)
    us = np.linspace(-jitter, jitter, 20001)
    rhos = [diagnostics(scheme, h0 * (1.0 + u)).rho for u in us]
    half_avg_rho = 0.5 * float(np.trapezoid(rhos, us)) / (2.0 * jitter)
    assert math.isclose(got, half_avg_rho, rel_tol=2e-2)


def test_jitter_average_degenerate_cases():
    scheme = catalog("VV")
    exact = expected_energy_error_harmonic(scheme, 0.3, 4, [1.0])
    assert jitter_averaged_energy_error(scheme, 0.3, 4, [1.0], 0.0) == exact
    with pytest.raises(ValueError):
        jitter_averaged_energy_error(scheme, 0.3, 4, [1.0], 1.5)


def test_stationary_acceptance_tracks_oracle():
    # Small chain, but the oracle gap is wide enough to resolve: VV at
    # h0 = 1/d on chain:32 sits near 0.5 mean delta per proposal.
    d = 32
    scheme = catalog("VV")
    cfg = HmcConfig(h0=1.0 / d, steps_per_proposal=2 * d, chain_length=800,
                    seed=21)
    res = hmc_run(scheme, gaussian_chain(d), cfg)
    expected = jitter_averaged_energy_error(
        scheme, cfg.h0, cfg.steps_per_proposal, np.arange(1.0, d + 1.0),
        cfg.jitter)
    se = math.sqrt(res.mean_squared_energy_error / res.n_proposals)
    assert abs(res.mean_energy_error - expected) < 5.0 * se
