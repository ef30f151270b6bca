import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excitonslab.errors import InvalidParameterError, UnphysicalStateError
from excitonslab.model import (
    ExcitonMoments,
    SlabParams,
    augmented_covariance,
    build_mode_grid,
    derive_dimensionless,
    dft_matrix,
    layer_positions,
    moments_from_state_spec,
)

from conftest import random_gaussian_moments


# ------------------------------------------------------------ parameters
def test_params_validation():
    with pytest.raises(InvalidParameterError):
        SlabParams(0, 0.01, 1e-4)
    with pytest.raises(InvalidParameterError):
        SlabParams(2, 0.0, 1e-4)
    with pytest.raises(InvalidParameterError):
        SlabParams(2, 0.01, -1e-4)
    with pytest.raises(InvalidParameterError):
        SlabParams(2.5, 0.01, 1e-4)


def test_large_parameters_warn_only():
    with pytest.warns(UserWarning):
        p = SlabParams(2, 0.5, 0.2)
    assert p.g == 0.2


def test_derive_dimensionless_reference_point():
    # Omega = a = 1, c = 100 and d^2/hbar tuned so that 4 pi d^2/(hbar a^2 c) = 1e-4
    hbar = 1.0
    d = math.sqrt(1e-4 * 100 / (4 * math.pi))
    p = derive_dimensionless(1.0, 1.0, d, hbar, 100.0)
    assert p.delta0 == pytest.approx(1e-2, rel=1e-14)
    assert p.g == pytest.approx(1e-4, rel=1e-14)


def test_derive_dimensionless_eta_identity():
    # g Omega = eta = a f^2 / (2c) with f^2 = 8 pi Omega d^2 / (hbar a^3)
    w, a, d, hbar, c = 2.3e15, 4e-8, 3e-18, 1.0546e-27, 2.998e10
    p = derive_dimensionless(w, a, d, hbar, c)
    f2 = 8 * math.pi * w * d**2 / (hbar * a**3)
    assert p.g * w == pytest.approx(a * f2 / (2 * c), rel=1e-12)
    assert p.delta0 == pytest.approx(w * a / c, rel=1e-14)


def test_derive_dimensionless_rejects_zero_dipole():
    with pytest.raises(InvalidParameterError):
        derive_dimensionless(1.0, 1.0, 0.0, 1.0, 100.0)


def test_inconsistent_physical_g_rejected():
    p = derive_dimensionless(1.0, 1.0, 0.03, 1.0, 100.0)
    with pytest.raises(InvalidParameterError):
        p.replace(g=p.g * (1 + 1e-9))


def test_unit_factors_round_trip():
    p = derive_dimensionless(2.0, 3.0, 0.05, 1.5, 400.0, area=7.0)
    u = p.unit_factors()
    assert u["time_s"] == pytest.approx(0.5)
    # one lattice constant in physical length
    assert p.delta0 * u["length_cm"] == pytest.approx(3.0)
    assert u["eta_rad_s"] == pytest.approx(p.g * 2.0)
    assert u["S0"] == pytest.approx(p.g * 2.0 * 1.5 * 2.0 / 7.0)


@given(st.floats(0.1, 10))
def test_derive_dimensionless_scale_invariance(s):
    base = derive_dimensionless(1.0, 1.0, 0.02, 1.0, 50.0)
    # Omega -> s Omega with a -> a/s and d -> d/s
    p1 = derive_dimensionless(s, 1.0 / s, 0.02 / s, 1.0, 50.0)
    # Omega and c scaled together, d^2 following c
    p2 = derive_dimensionless(s, 1.0, 0.02 * math.sqrt(s), 1.0, 50.0 * s)
    for p in (p1, p2):
        assert p.delta0 == pytest.approx(base.delta0, rel=1e-12)
        assert p.g == pytest.approx(base.g, rel=1e-12)


# ------------------------------------------------------------------ grid
def test_grid_examples():
    assert build_mode_grid(1).m_values == (0,)
    g2 = build_mode_grid(2)
    assert g2.m_values == (-0.5, 0.5)
    np.testing.assert_allclose(g2.k_values, [-math.pi / 2, math.pi / 2])
    assert build_mode_grid(3).m_values == (-1, 0, 1)
    with pytest.raises(InvalidParameterError):
        build_mode_grid(0)


@given(st.integers(1, 40))
def test_grid_symmetric(n):
    grid = build_mode_grid(n)
    assert grid.n == n == len(grid.l_values)
    assert sum(grid.m_values) == 0
    assert max(abs(m) for m in grid.m_values) == (n - 1) / 2


@given(st.integers(1, 12))
def test_dft_unitary(n):
    u = dft_matrix(n)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(n), atol=1e-13)


def test_layer_positions_centred():
    p = SlabParams(4, 0.1, 1e-3)
    np.testing.assert_allclose(layer_positions(p), [-0.15, -0.05, 0.05, 0.15])
    assert p.slab_half_width == pytest.approx(0.15)


# ---------------------------------------------------------------- states
def test_fock_state():
    m = moments_from_state_spec({"kind": "fock", "occupations": [1, 0]})
    assert np.all(m.mean == 0) and np.all(m.anomalous == 0)
    assert m.normal[0, 0] == 1


def test_fock_needs_integers():
    with pytest.raises(InvalidParameterError):
        moments_from_state_spec({"kind": "fock", "occupations": [0.5, 0]})


def test_coherent_superradiant_mean():
    # mu_+ = mu_- = alpha/sqrt2 gives <B0> = (B_+ + B_-)/sqrt2 = alpha
    alpha = 0.3 - 0.4j
    m = moments_from_state_spec({"kind": "coherent", "amplitudes": [alpha / math.sqrt(2)] * 2})
    b0 = (m.mean[0] + m.mean[1]) / math.sqrt(2)
    assert b0 == pytest.approx(alpha)
    np.testing.assert_allclose(m.normal, np.outer(m.mean.conj(), m.mean))


def test_chaotic_psd():
    m = moments_from_state_spec({"kind": "chaotic", "occupations": [0.1, 0.1]})
    np.testing.assert_allclose(m.normal, 0.1 * np.eye(2))
    ev = np.linalg.eigvalsh(augmented_covariance(m.mean, m.normal, m.anomalous))
    assert ev.min() >= 0


def test_unphysical_rejected():
    with pytest.raises(UnphysicalStateError):
        moments_from_state_spec({"kind": "raw", "normal": [[-0.1, 0], [0, 0]]})
    # |<BB>|^2 > n (n + 1) is forbidden
    with pytest.raises(UnphysicalStateError):
        moments_from_state_spec({"kind": "raw", "normal": [[0.1]], "anomalous": [[1.0]]})
    with pytest.raises(UnphysicalStateError):
        moments_from_state_spec({"kind": "chaotic", "occupations": [-1, 0]})


def test_squeezed_vacuum_accepted():
    r = 0.7
    moments_from_state_spec({"kind": "raw", "normal": [[math.sinh(r) ** 2]],
                             "anomalous": [[-math.sinh(r) * math.cosh(r)]]})


def test_unknown_keys_rejected():
    with pytest.raises(InvalidParameterError):
        moments_from_state_spec({"kind": "fock", "occupations": [1], "extra": 1})
    with pytest.raises(InvalidParameterError):
        moments_from_state_spec({"kind": "coherent", "amplitudes": [1, 2]}, n_layers=3)


def test_complex_input_forms():
    m = moments_from_state_spec({"kind": "coherent", "amplitudes": ["1+2i", [0.5, -1], 3j]})
    np.testing.assert_allclose(m.mean, [1 + 2j, 0.5 - 1j, 3j])


@settings(max_examples=40)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_layer_k_commutes_with_transform(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    via_layer = moments_from_state_spec({"kind": "coherent", "basis": "layer", "amplitudes": list(amps)})
    via_k = moments_from_state_spec({"kind": "coherent", "amplitudes": list(dft_matrix(n) @ amps)})
    np.testing.assert_allclose(via_layer.mean, via_k.mean, atol=1e-12)
    np.testing.assert_allclose(via_layer.normal, via_k.normal, atol=1e-12)
    mu_l, n_l, m_l = via_k.to_layer_basis()
    np.testing.assert_allclose(mu_l, amps, atol=1e-12)
    np.testing.assert_allclose(n_l, np.outer(amps.conj(), amps), atol=1e-12)


@settings(max_examples=40)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_random_gaussian_states_physical(n, seed):
    mu, nm, am = random_gaussian_moments(np.random.default_rng(seed), n)
    m = ExcitonMoments(mu, nm, am)
    # unitary basis changes preserve physicality
    m.transformed(dft_matrix(n))
    assert m.excitation_number >= 0


def test_moments_immutable():
    m = moments_from_state_spec({"kind": "fock", "occupations": [1]})
    with pytest.raises(ValueError):
        m.normal[0, 0] = 2
