import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excitonslab.coupling import (
    LABEL_ORDER,
    coupling_matrix,
    coupling_matrix_by_quadrature,
    d_matrix_exact,
    d_matrix_expansion_check,
    d_matrix_second_order,
    layer_kernel,
    matching_factor,
    propagator_by_quadrature,
    to_k_basis,
)
from excitonslab.errors import SingularFrequencyError, UnsupportedError
from excitonslab.model import SlabParams

omegas = st.complex_numbers(min_magnitude=0.2, max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def test_matching_factor_examples():
    assert matching_factor(0.7, 0.7, 5) == pytest.approx(1.0)
    assert matching_factor(math.pi / 2, 0.0, 2) == pytest.approx(math.cos(math.pi / 4))
    assert abs(matching_factor(2 * math.pi / 3, 0.0, 3)) < 1e-15


@given(st.floats(-3, 3), st.integers(1, 8))
def test_matching_factor_sine_ratio(x, n):
    # away from the removable points the sum equals the sine ratio
    if abs(math.sin(x / 2)) < 1e-3:
        return
    want = math.sin(n * x / 2) / (n * math.sin(x / 2))
    assert matching_factor(x, 0.0, n).real == pytest.approx(want, abs=1e-12)


def test_layer_kernel_examples():
    w = 0.97 - 0.01j
    k2 = layer_kernel(w, 2, 0.05).f
    np.testing.assert_allclose(np.diag(k2), 1.0)
    assert k2[0, 1] == pytest.approx(cmath.exp(1j * w * 0.05))
    k3 = layer_kernel(1.0, 3, 0.05).f
    assert abs(k3[0, 2]) == pytest.approx(1.0)
    assert cmath.phase(k3[0, 2]) == pytest.approx(2 * 0.05)
    with pytest.raises(SingularFrequencyError):
        layer_kernel(0.0, 2, 0.05)
    with pytest.raises(SingularFrequencyError):
        coupling_matrix(0.0, SlabParams(2, 0.05, 1e-3))


def test_kernel_matches_quadrature_of_outgoing_wave():
    # the propagator integral at distance 2 delta gives the retarded kernel entry
    w, d = 1.0 - 0.05j, 0.05
    val = propagator_by_quadrature(w, 2 * d)
    # int dq exp(iqx)/(q^2 - w^2) = i pi exp(i w |x|)/w for the outgoing solution
    assert val == pytest.approx(1j * math.pi * cmath.exp(2j * w * d) / w, rel=1e-8)


def test_n2_structure():
    p = SlabParams(2, 0.05, 1e-3)
    w = 0.99 - 0.002j
    f_layer = coupling_matrix(w, p, basis="layer").f
    assert f_layer[0, 0] == pytest.approx(-0.5j * p.g / w)
    assert f_layer[0, 1] / f_layer[0, 0] == pytest.approx(cmath.exp(1j * w * p.delta0))
    # -(2 w^2) * (diagonal coupling) = i w eta
    assert -2 * w * w * f_layer[0, 0] == pytest.approx(1j * w * p.g)


def test_n1_monolayer():
    p = SlabParams(1, 0.05, 1e-3)
    w = 1.1 - 0.3j
    assert coupling_matrix(w, p).f[0, 0] == pytest.approx(-0.5j * p.g / w)
    # and the quadrature route agrees
    assert coupling_matrix_by_quadrature(w, p).f[0, 0] == pytest.approx(-0.5j * p.g / w, rel=1e-8)


def test_n3_d_matrix_limit():
    d = d_matrix_exact(1.0, 0.0)
    # D_00 -> 9i and every other entry -> 0 (label order (1, 0, -1))
    assert d[1, 1] == pytest.approx(9j)
    off = d.copy()
    off[1, 1] = 0
    assert np.max(np.abs(off)) < 1e-15


def test_n3_coupling_is_d_matrix():
    p = SlabParams(3, 0.03, 1e-3)
    w = 1.0 - 0.001j
    f = coupling_matrix(w, p).f
    d = d_matrix_exact(w, p.delta0)
    f_lab = f[np.ix_(LABEL_ORDER, LABEL_ORDER)]
    np.testing.assert_allclose(f_lab, -(p.g / (6 * w)) * d, atol=1e-15)


@settings(max_examples=100)
@given(omegas, st.integers(1, 6), st.floats(0.001, 0.3))
def test_symmetry_and_conjugation(w, n, d):
    if w == 0:
        return
    p = SlabParams(n, d, 1e-3)
    f = coupling_matrix(w, p).f
    np.testing.assert_allclose(f, f.T, atol=1e-14 * np.max(np.abs(f)))
    f_mirror = coupling_matrix(-w.conjugate(), p).f
    np.testing.assert_allclose(f_mirror, f.conj(), atol=1e-14 * np.max(np.abs(f)))


@settings(max_examples=50)
@given(omegas, st.integers(1, 6), st.floats(0.001, 0.3))
def test_k_basis_is_unitary_image_of_layer_kernel(w, n, d):
    if w == 0:
        return
    p = SlabParams(n, d, 1e-3)
    f_k = coupling_matrix(w, p).f
    f_l = coupling_matrix(w, p, basis="layer").f
    np.testing.assert_allclose(to_k_basis(f_l), f_k, atol=1e-12 * np.max(np.abs(f_k)))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("w", [1.0 - 0.01j, 0.8 - 0.3j, 1.3 - 0.2j])
def test_quadrature_oracle_agrees(n, w):
    p = SlabParams(n, 0.07, 1e-3)
    f = coupling_matrix(w, p).f
    fq = coupling_matrix_by_quadrature(w, p).f
    assert np.max(np.abs(fq - f)) <= 1e-6 * np.max(np.abs(f))


def test_expansion_check_examples():
    p = SlabParams(3, 1e-2, 1e-4)
    assert d_matrix_expansion_check(0.0, p) == 0.0
    assert np.max(np.abs(d_matrix_exact(1.0, 0.0) - d_matrix_second_order(0.0))) == 0.0
    r2 = d_matrix_expansion_check(1.0, p)
    assert r2 <= 10 * 1e-2**3
    r1 = d_matrix_expansion_check(1.0, p.replace(delta0=1e-1))
    assert r1 / r2 == pytest.approx(1e3, rel=0.1)
    with pytest.raises(UnsupportedError):
        d_matrix_expansion_check(1.0, SlabParams(2, 1e-2, 1e-4))


def test_expansion_residual_is_cubic():
    p = SlabParams(3, 1e-2, 1e-4)
    ds = np.logspace(-3, -1, 9)
    res = [d_matrix_expansion_check(1.0, p.replace(delta0=d)) for d in ds]
    slope = np.polyfit(np.log(ds), np.log(res), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.1)
