"""Exciton-exciton coupling through the radiation field.

The photon-mediated coupling between exciton waves k and k' is

    F_kk'(w) = -i eta/(2 N w) sum_{l,l'} exp(i(k l - k' l') a) exp(i w a |l - l'|)

(units Omega = c = 1).  In the layer basis this is the kernel
-i eta/(2w) * exp(i w a |l - l'|): each layer radiates an outgoing wave
that reaches layer l' with phase delta*|l - l'|, delta = w a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import SingularFrequencyError, UnsupportedError
from .model import build_mode_grid, dft_matrix


@dataclass(frozen=True)
class CouplingMatrix:
    omega: complex
    f: np.ndarray
    basis: str  # "k" or "layer"

    def __post_init__(self):
        arr = np.array(self.f, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "f", arr)


def _check_omega(omega):
    omega = complex(omega)
    if omega == 0:
        raise SingularFrequencyError("F(w) has a pole at w = 0")
    return omega


def matching_factor(k, q, n_layers, a=1.0):
    """(1/N) sum_l exp(i (k - q) l a); equals sin(N x/2)/(N sin(x/2)) with x = (k-q)a.

    Evaluated as the finite sum so that k = q needs no special case.
    """
    grid = build_mode_grid(n_layers)
    l = np.asarray(grid.l_values, dtype=float)
    x = np.multiply.outer(np.asarray(k, dtype=complex) - np.asarray(q, dtype=complex), l * a)
    out = np.exp(1j * x).sum(axis=-1) / n_layers
    return complex(out) if np.ndim(out) == 0 else out


def layer_distance(n_layers):
    l = np.arange(n_layers)
    return np.abs(l[:, None] - l[None, :]).astype(float)


def layer_kernel(omega, n_layers, delta0, g=None):
    """Layer-basis radiation kernel.

    With g=None returns the unscaled kernel exp(i w a |l - l'|) (unit
    diagonal).  With g given returns the coupling -i g/(2w) times it, whose
    unitary transform to the k basis is coupling_matrix.
    """
    omega = _check_omega(omega)
    e = np.exp(1j * omega * delta0 * layer_distance(n_layers))
    if g is not None:
        e = (-0.5j * g / omega) * e
    return CouplingMatrix(omega=omega, f=e, basis="layer")


def coupling_matrix(omega, params, basis="k"):
    """F(w) in the k basis (rows/cols ascending m) or the layer basis."""
    omega = _check_omega(omega)
    n = params.n_layers
    grid = build_mode_grid(n)
    if basis == "layer":
        return layer_kernel(omega, n, params.delta0, g=params.g)
    if basis != "k":
        raise ValueError(f"unknown basis {basis!r}")
    ka = np.asarray(grid.k_values) * 1.0  # k*a, since k is in units of 1/a
    l = np.asarray(grid.l_values, dtype=float)
    # explicit double sum over layer pairs
    ph_out = np.exp(1j * np.outer(ka, l))           # exp(i k l a)
    ph_in = np.exp(-1j * np.outer(ka, l))           # exp(-i k' l' a)
    e = np.exp(1j * omega * params.delta0 * np.abs(l[:, None] - l[None, :]))
    f = ph_out @ e @ ph_in.T
    f *= -0.5j * params.g / (n * omega)
    return CouplingMatrix(omega=omega, f=f, basis="k")


def to_k_basis(layer_matrix):
    """U K U^dag: the k-basis image of a layer-basis matrix."""
    n = layer_matrix.shape[0]
    u = dft_matrix(n)
    return u @ layer_matrix @ u.conj().T


# ---------------------------------------------------------------- N = 3 forms
# Row/column order (m = 1, 0, -1), the customary layout of the 3x3 matrices;
# LABEL_ORDER maps it onto the ascending grid order.
LABEL_ORDER = np.array([2, 1, 0])


def layer_sum_matrix(x):
    """M(x) for N=3 with x = exp(i delta), order (1, 0, -1)."""
    return np.array([
        [3 - 2 * x - x * x, x - x * x, 2 * x * x - 2 * x],
        [x - x * x, 3 + 4 * x + 2 * x * x, x - x * x],
        [2 * x * x - 2 * x, x - x * x, 3 - 2 * x - x * x],
    ], dtype=complex)


def d_matrix_exact(omega, delta0):
    """D = i M(exp(i w a)) so that F = -(eta/(6w)) D for N = 3."""
    return 1j * layer_sum_matrix(np.exp(1j * complex(omega) * delta0))


def d_matrix_second_order(delta):
    """Second-order expansion of D in delta = w a.

    Entry (1,0) is delta + (3/2) i delta^2 like its symmetric partners.
    """
    d = complex(delta)
    d2 = d * d
    a = 4 * d + 3j * d2
    b = 9j - 8 * d - 6j * d2
    c = d + 1.5j * d2
    e = -2 * d - 3j * d2
    return np.array([[a, c, e], [c, b, c], [e, c, a]], dtype=complex)


def d_matrix_expansion_check(omega, params):
    """max |D_exact - D_second_order| at delta = w a (N = 3 only)."""
    if params.n_layers != 3:
        raise UnsupportedError("the D-matrix expansion is defined for N = 3 only")
    omega = complex(omega)
    delta = omega * params.delta0
    if delta == 0:
        return 0.0
    return float(np.max(np.abs(d_matrix_exact(omega, params.delta0) - d_matrix_second_order(delta))))


# ------------------------------------------------------- quadrature oracle
def _half_line(fun, x, split):
    # peaked part on [0, split] with an oscillatory weight, smooth tail via QAWF
    vals = []
    for part in (lambda q: fun(q).real, lambda q: fun(q).imag):
        if x == 0:
            head = integrate.quad(part, 0, split, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
            tail = integrate.quad(part, split, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        else:
            head = integrate.quad(part, 0, split, weight="cos", wvar=x, epsabs=1e-14,
                                  epsrel=1e-12, limit=400)[0]
            tail = integrate.quad(part, split, np.inf, weight="cos", wvar=x, epsabs=1e-14,
                                  limlst=200)[0]
        vals.append(head + tail)
    return complex(vals[0], vals[1])


def propagator_by_quadrature(omega, x):
    """Retarded value of int dq exp(i q x)/(q^2 - w^2) by real-line quadrature.

    The real-axis integral is the retarded one only for Im w > 0.  For
    Im w < 0 the poles at q = +-w have crossed the axis and their residues
    are added back (q = w passes below, q = -w above).  Real w is rejected.
    """
    omega = complex(omega)
    if omega.imag == 0 or omega == 0:
        raise SingularFrequencyError("quadrature oracle needs Im w != 0")
    fun = lambda q: 1.0 / (q * q - omega * omega)
    # even integrand: 2 * int_0^inf cos(q x) ...
    val = 2 * _half_line(fun, abs(float(x)), split=4 * abs(omega) + 10.0)
    if omega.imag < 0:
        res_p = np.exp(1j * omega * x) / (2 * omega)
        res_m = np.exp(-1j * omega * x) / (-2 * omega)
        val += 2j * math.pi * (res_p - res_m)
    return val


def coupling_matrix_by_quadrature(omega, params):
    """k-basis F from the q-integral of the matching-factor product.

    F_kk' = -(N eta/(2 pi)) int dq O(k-q) O(q-k')/(q^2 - w^2); the product of
    matching factors expands into exp(i q (l' - l) a) terms, each integrated
    numerically.
    """
    omega = _check_omega(omega)
    n = params.n_layers
    grid = build_mode_grid(n)
    ka = np.asarray(grid.k_values)
    l = np.asarray(grid.l_values, dtype=float)
    cache = {}
    for d in range(n):
        cache[d] = propagator_by_quadrature(omega, d * params.delta0)
    f = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            acc = 0j
            for li, lv in enumerate(l):
                for lj, lw in enumerate(l):
                    acc += np.exp(1j * (ka[i] * lv - ka[j] * lw)) * cache[abs(li - lj)]
            f[i, j] = acc / n**2
    f *= -n * params.g / (2 * math.pi)
    return CouplingMatrix(omega=omega, f=f, basis="k")
