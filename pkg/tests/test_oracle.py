import math

import numpy as np
import pytest

from excitonslab import oracle, validation
from excitonslab.dynamics import DetectorSpec, FieldTrace, flux_trace
from excitonslab.errors import ConfigError, InvalidParameterError, ResolutionError
from excitonslab.model import SlabParams, dft_matrix, moments_from_state_spec
from excitonslab.spectrum import find_modes, superradiant

S2 = 1 / math.sqrt(2)


def small_bath(**kw):
    return oracle.default_bath(5.0, 2.0, q_max=20, **kw)


# ------------------------------------------------------------- bath setup
def test_bath_validation_messages():
    b = small_bath()
    b.validate(t_max=5.0, z_detector=2.0)
    coarse = oracle.BathConfig(b.box_length, b.j_max, dt=10 * b.dt)
    with pytest.raises(ConfigError, match="reduce dt"):
        coarse.validate()
    low = oracle.BathConfig(b.box_length, 5, dt=1e-4)
    with pytest.raises(ConfigError, match="raise j_max"):
        low.validate()
    with pytest.raises(ConfigError, match="wrap-around"):
        b.validate(t_max=100.0)


def test_detector_checks():
    p = SlabParams(3, 0.5, 0.05)
    with pytest.raises(InvalidParameterError):
        oracle.simulate(p, [1, 0, 0], small_bath(), 1.0, detectors=[0.2])
    with pytest.raises(InvalidParameterError):
        oracle.simulate(SlabParams(1, 0.1, 0.0), [1], small_bath(), 1.0, detectors=[2.0])
    run = oracle.simulate(p, [1, 0, 0], small_bath(), 1.0, detectors=[2.0])
    with pytest.raises(InvalidParameterError):
        oracle.detector_field(run, 3.0)


# ----------------------------------------------------------- trivial runs
def test_zero_state_stays_zero():
    p = SlabParams(2, 0.05, 0.1)
    run = oracle.simulate(p, [0, 0], small_bath(), 3.0, detectors=[2.0])
    assert np.all(run.beta == 0) and np.all(run.fields[2.0] == 0)
    assert np.all(run.final.alpha == 0) and run.final.a0 == 0


def test_free_evolution_at_zero_coupling():
    p = SlabParams(2, 0.05, 0.0)
    b0 = np.array([0.3 + 0.1j, -0.7j])
    run = oracle.simulate(p, b0, small_bath(), 4.0)
    want = np.exp(-1j * run.times)[:, None] * b0[None, :]
    np.testing.assert_allclose(run.beta, want, atol=1e-10)
    assert np.all(run.final.alpha == 0)


def test_step_equations_matches_simulate():
    p = SlabParams(2, 0.05, 0.1)
    b = small_bath()
    st = oracle.OracleState(beta=np.array([1.0, 0.5j]), alpha=np.zeros(b.n_modes, complex))
    e0 = oracle.energy(st, b, p)
    for _ in range(10):
        st = oracle.step_equations(st, b, p)
    run = oracle.simulate(p, [1.0, 0.5j], b, 10 * b.dt, sample_every=1)
    np.testing.assert_allclose(st.beta, run.final.beta, atol=1e-15)
    assert st.t == pytest.approx(10 * b.dt)
    assert oracle.energy(st, b, p) == pytest.approx(e0, rel=1e-10)


def test_energy_conserved():
    p = SlabParams(3, 0.05, 0.1)
    run = oracle.simulate(p, [0.2, 1.0, -0.4j], oracle.default_bath(20.0, 0.0, q_max=20), 20.0)
    assert np.ptp(run.energy) <= 1e-6 * abs(run.energy[0])


def test_dt_convergence_fourth_order():
    p = SlabParams(2, 0.05, 0.1)
    base = oracle.default_bath(6.0, 2.0, q_max=20)
    # dt at the validity limit and two halvings; the field differences shrink ~16x
    fields = []
    for k in range(3):
        cfg = oracle.BathConfig(base.box_length, base.j_max, base.dt / 2**k)
        run = oracle.simulate(p, [1.0, 1j], cfg, 6.0, detectors=[2.0], sample_every=2**k)
        fields.append(run.fields[2.0])
    n = min(f.size for f in fields)
    d1 = np.max(np.abs(fields[0][:n] - fields[1][:n]))
    d2 = np.max(np.abs(fields[1][:n] - fields[2][:n]))
    assert 8 < d1 / d2 < 32


def test_box_length_converged():
    # no wrap-around: doubling L leaves the early field unchanged
    p = SlabParams(1, 0.1, 0.1)
    a = oracle.default_bath(8.0, 2.0, q_max=20)
    b = oracle.default_bath(16.0, 2.0, q_max=20)
    ra = oracle.simulate(p, [1j], a, 8.0, detectors=[2.0])
    rb = oracle.simulate(p, [1j], b, 8.0, detectors=[2.0])
    ta, tb = ra.times, rb.times
    fb = np.interp(ta, tb, rb.fields[2.0])
    assert np.max(np.abs(fb - ra.fields[2.0])) <= 0.02 * np.max(np.abs(ra.fields[2.0]))


# ------------------------------------------------------------------ rates
def test_monolayer_rate():
    g = 0.1
    p = SlabParams(1, 0.1, g)
    t_max = 3 / (g / 2)
    run = oracle.simulate(p, [1.0], oracle.default_bath(t_max, 0.0, q_max=20), t_max)
    sel = run.times > 1.0
    fits = oracle.fit_exponentials(run.times[sel], run.beta[sel, 0], 2)
    # dominant term: the excitation itself; the second is its counter-rotating image
    assert fits[0].gamma == pytest.approx(g / 2, rel=0.02)
    assert fits[0].omega > 0 > fits[1].omega


def test_n2_superradiant_rate_from_detector():
    p = SlabParams(2, 0.05, 0.1)
    ms = find_modes(p)
    g1 = ms.by_label("1").gamma
    z = 2.0
    t_max = z + 3 / g1
    bath = oracle.default_bath(t_max, z, q_max=20)
    run = oracle.simulate(p, [1j * S2, 1j * S2], bath, t_max, detectors=[z])
    fits = oracle.extract_rates(oracle.detector_field(run, z), 1, tau_min=1.0, bath=bath)
    assert fits[0].gamma == pytest.approx(g1, rel=0.02)


@pytest.mark.slow
def test_n2_subradiant_rate_long_run():
    # large delta0 keeps 5 subradiant lifetimes affordable
    p = SlabParams(2, 0.8, 0.2)
    ms = find_modes(p)
    g2 = ms.by_label("2").gamma
    t_max = 5 / g2
    run = oracle.simulate(p, [S2, -S2], oracle.default_bath(t_max, 0.0, q_max=20), t_max)
    proj = run.beta @ np.array([S2, -S2])
    sel = run.times > 0.1 * t_max
    fits = oracle.fit_exponentials(run.times[sel], proj[sel], 2)
    assert fits[0].gamma == pytest.approx(g2, rel=0.10)


def test_synthetic_fit():
    tau = np.linspace(0, 3e4, 60001)
    env = (0.7 - 0.2j) * np.exp((-1e-4 - 1j * 0.999) * tau)
    tr = FieldTrace(times=tau + 1.0, envelope=env, retarded_time_origin=1.0)
    fits = oracle.extract_rates(tr, 1)
    assert fits[0].gamma == pytest.approx(1e-4, rel=1e-3)
    assert fits[0].omega == pytest.approx(0.999, rel=1e-9)


def test_unresolved_rate_asks_for_larger_box():
    tau = np.linspace(0, 50, 501)
    env = np.exp((-1e-4 - 1j) * tau)
    tr = FieldTrace(times=tau, envelope=env, retarded_time_origin=0.0)
    bath = oracle.BathConfig(box_length=100.0, j_max=400, dt=1e-3)
    with pytest.raises(ResolutionError, match="enlarge box_length"):
        oracle.extract_rates(tr, 1, bath=bath)
    with pytest.raises(ResolutionError):
        oracle.extract_rates(FieldTrace(times=tau[:5], envelope=env[:5], retarded_time_origin=0.0), 1)


def test_matrix_pencil_two_terms():
    t = np.linspace(0, 10, 400)
    s = np.array([-0.1 - 1j, -0.02 - 2j])
    y = np.exp(np.outer(t, s)) @ np.array([1.0, 0.5j])
    np.testing.assert_allclose(sorted(oracle.matrix_pencil(t, y, 2), key=lambda x: x.real),
                               sorted(s, key=lambda x: x.real), atol=1e-8)


# ------------------------------------------------------- analytic agreement
def test_field_matches_analytic_n2_coarse():
    p = SlabParams(2, 0.05, 0.1)
    mom = moments_from_state_spec({"kind": "coherent", "basis": "layer", "amplitudes": [1j * S2, 1j * S2]})
    res = validation.oracle_field_comparison(p, mom, z=3.0, q_max=20)
    assert res["l2"] <= 0.02
    assert res["precone_analytic"] == 0.0
    assert res["energy_drift"] <= 1e-6


def test_ablation_rwa_changes_rate_at_order_g():
    g = 0.1
    p = SlabParams(1, 0.1, g)
    t_max = 3 / (g / 2)
    rates = []
    for cr, tp in ((True, True), (False, False)):
        bath = oracle.default_bath(t_max, 0.0, q_max=20, counter_rotating=cr, two_photon=tp)
        run = oracle.simulate(p, [1.0], bath, t_max)
        sel = run.times > 1.0
        rates.append(oracle.fit_exponentials(run.times[sel], run.beta[sel, 0], 2)[0].gamma)
    rel = abs(rates[1] / rates[0] - 1)
    assert 0.1 * g < rel < 2 * g


@pytest.mark.slow
def test_green_runs_flux_matches_exact_flux():
    p = SlabParams(2, 0.05, 0.1)
    ms = find_modes(p)
    z = 2.0
    g1 = superradiant(ms).gamma
    t_max = z + 2 / g1
    bath = oracle.default_bath(t_max, z, q_max=20)
    runs = oracle.green_runs(p, bath, t_max, [z])
    mom = moments_from_state_spec({"kind": "chaotic", "basis": "layer", "occupations": [0.3, 0.6]})
    times, fl = oracle.flux_from_green_runs(runs, mom, z, exact=True)
    ana = flux_trace(ms, mom, DetectorSpec(z, times, "+"), p, exact=True, causal="layer").flux
    sel = times - z > 0.5
    err = np.linalg.norm(fl[sel] - ana[sel]) / np.linalg.norm(ana[sel])
    assert err <= 0.03
