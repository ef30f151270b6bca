"""Hand-coded leading-order field and flux formulas for N = 2 and N = 3.

These are the closed forms valid to first order in g and delta0 (second
order for the subradiant pieces).  They serve as regression targets for the
general residue machinery in ``dynamics`` and are never used by it.

Collective operators are written in the k basis (grid order, ascending m):

    N = 2:  B0 = (B_{+} + B_{-})/sqrt2,   B1 = (B_{+} - B_{-})/sqrt2
    N = 3:  B0 = B_{m=0},  B_pm = (B_{m=1} pm B_{m=-1})/sqrt2

Units: field in E0, flux in S0, time in 1/Omega.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import UnsupportedError


def collective_basis(n_layers):
    """Rows express the collective operators in terms of the k-basis B_m."""
    s = 1 / math.sqrt(2)
    if n_layers == 2:
        # columns: m = -1/2, +1/2
        return np.array([[s, s], [-s, s]], dtype=complex)
    if n_layers == 3:
        # columns: m = -1, 0, 1; rows: B0, B+, B-
        return np.array([[0, 1, 0], [s, 0, s], [-s, 0, s]], dtype=complex)
    raise UnsupportedError("closed forms exist for N = 2 and N = 3 only")


def collective_moments(moments):
    """(mu, n, m) re-expressed in the collective basis."""
    p = collective_basis(moments.mean.size)
    t = moments.transformed(p)
    return t.mean, t.normal, t.anomalous


def rates_n2(params):
    """Leading-order (Omega_1, Gamma_1, Omega_2, Gamma_2) for N = 2."""
    g, d = params.g, params.delta0
    return 1 - g * g / 2 + g * d / 2, g, 1 - g * d / 2, g * d * d / 4


def rates_n3(params):
    """Leading-order decay rates (Gamma_0, Gamma_+, Gamma_-) for N = 3."""
    g, d = params.g, params.delta0
    return 1.5 * g, g * d * d / 27, g * d * d


def shifts_n3(params):
    """Leading-order frequencies (Omega_0, Omega_+, Omega_-) for N = 3.

    From omega = 1 - (g/6) D_m at omega = 1, with the first-order D
    eigenvalues -8 delta, 2 delta and 6 delta.
    """
    g, d = params.g, params.delta0
    return 1 + 4 * g * d / 3, 1 - g * d / 3, 1 - g * d


def _tau(tau):
    tau = np.asarray(tau, dtype=float)
    return tau, (tau >= 0).astype(float)


def field_n2(moments, tau, params):
    """<eps> at retarded time tau from the two-mode leading-order envelope."""
    if moments.mean.size != 2:
        raise UnsupportedError("field_n2 needs N = 2 moments")
    mu = collective_moments(moments)[0]
    w1, g1, w2, g2 = rates_n2(params)
    tau, on = _tau(tau)
    sup = (mu[0] - 0.5j * params.g * np.conj(mu[0])) * np.exp(-1j * w1 * tau - g1 * tau)
    sub = 0.5 * params.delta0 * mu[1] * np.exp(-1j * w2 * tau - g2 * tau)
    return on * (sup + sub)


def flux_n2(moments, tau, params):
    """Three-rate leading-order flux for N = 2.

    Returns {'super', 'sub', 'cross'} decaying at 2 eta, 2 eta' and
    eta + eta'.  The cross term keeps its slow beat at Omega_1 - Omega_2,
    which is first order in g and only matters after many lifetimes.
    """
    if moments.mean.size != 2:
        raise UnsupportedError("flux_n2 needs N = 2 moments")
    _, n, m = collective_moments(moments)
    g, d = params.g, params.delta0
    eta, etap = g, g * d * d / 4
    tau, on = _tau(tau)
    h = 0.5j * g
    # n[a, b] = <B_a^dag B_b>, m[a, b] = <B_a B_b>
    sup = n[0, 0] + h * m[0, 0] - h * np.conj(m[0, 0])
    sub = (etap / eta) * n[1, 1]
    w1, _, w2, _ = rates_n2(params)
    beat = np.exp(1j * (w1 - w2) * tau)
    # <B0^dag B1> and <B0 B1> carry exp(i(w1 - w2) tau), their conjugates the opposite
    half = (n[0, 1] * (1 + h) + h * m[0, 1]) * beat
    cross = math.sqrt(etap / eta) * 2 * half.real
    return {
        "super": on * (sup * np.exp(-2 * eta * tau)).real,
        "sub": on * (sub * np.exp(-2 * etap * tau)).real,
        "cross": on * cross * np.exp(-(eta + etap) * tau),
    }


def amplitudes_n3(params):
    """Leading emission coefficients of the three modes on (B0, B+, B-).

    Mode 0 is B0, the slow even mode is i delta/9 * sqrt2 * B+, the odd
    mode delta * sqrt(2/3) * B-, in units where the common field prefactor
    is sqrt(3/2) E0.
    """
    d = params.delta0
    pref = math.sqrt(1.5)
    return {
        "0": pref * np.array([1, 0, 0], dtype=complex),
        "+": pref * np.array([0, 1j * d * math.sqrt(2) / 9, 0], dtype=complex),
        "-": pref * np.array([0, 0, d * math.sqrt(2.0 / 3.0)], dtype=complex),
    }


def flux_n3(moments, tau, params):
    """Main part of the N = 3 flux: rates 3 eta, 8 eta'/27 and 8 eta'."""
    if moments.mean.size != 3:
        raise UnsupportedError("flux_n3 needs N = 3 moments")
    _, n, _ = collective_moments(moments)
    g, d = params.g, params.delta0
    etap = g * d * d / 4
    tau, on = _tau(tau)
    return {
        "0": on * (1.5 * n[0, 0].real * np.exp(-3 * g * tau)),
        "+": on * (d * d / 27 * n[1, 1].real * np.exp(-8 * etap / 27 * tau)),
        "-": on * (d * d * n[2, 2].real * np.exp(-8 * etap * tau)),
    }


def cross_n3_printed(moments, tau, params):
    """The N = 3 off-diagonal flux term in its published form (rate 3 eta/2)."""
    _, n, _ = collective_moments(moments)
    g, d = params.g, params.delta0
    tau, on = _tau(tau)
    pref = -1j * (d / 2) / (3 * math.sqrt(3))
    val = pref * ((n[1, 0] - n[0, 1]) + 3j * math.sqrt(3) * (n[2, 0] - n[0, 2]))
    return on * (val * np.exp(-1.5 * g * tau)).real


def cross_n3(moments, tau, params):
    """Off-diagonal flux terms rebuilt from the leading mode amplitudes.

    Returns {'0|+', '0|-', '+|-'}.  The first two decay at 3 eta/2; the
    last, between the two slow modes, is of the same order as the
    subradiant diagonal terms and decays at 28 eta'/27.
    """
    _, n, _ = collective_moments(moments)
    amp = amplitudes_n3(params)
    rates = dict(zip("0+-", rates_n3(params)))
    freqs = dict(zip("0+-", shifts_n3(params)))
    idx = {"0": 0, "+": 1, "-": 2}
    tau, on = _tau(tau)
    out = {}
    for a, b in (("0", "+"), ("0", "-"), ("+", "-")):
        i, j = idx[a], idx[b]
        ca, cb = amp[a][i], amp[b][j]
        half = np.conj(ca) * cb * n[i, j] * np.exp(1j * (freqs[a] - freqs[b]) * tau)
        out[a + "|" + b] = on * 2 * half.real * np.exp(-(rates[a] + rates[b]) * tau)
    return out
