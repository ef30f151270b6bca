"""Emitted field envelope and energy flux at a detector outside the slab.

For a detector at +z the field is built from the layer currents,

    E(z, w)/E0 = (1/sqrt 2) exp(i w z) sum_l exp(-i w z_l) J_l(w),
    J(w) = i S(w)^-1 [(w + 1) B(0) + (w - 1) B^dag(0)]   (layer basis),

and each radiative pole w_m contributes the residue
R_m = V (V^T S'(w_m) V)^-1 V^T, V being the null vectors of the complex
symmetric S(w_m).  The envelope is the positive-frequency part

    eps(tau) = sum_m (c_m . B + d_m . B^dag) exp(-i w_m tau),  tau = t - z,

with c_m = (w_m + 1) p_m R_m / sqrt 2, d_m = (w_m - 1) p_m R_m / sqrt 2 and
p_m the row of retardation phases exp(-i w_m z_l).  Flux is in units of
S0 = eta hbar Omega / A:  S/S0 = <:eps^dag eps:> (+ Re<:eps eps:> if exact).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidParameterError
from .model import dft_matrix, layer_positions
from .spectrum import _s_and_ds, mode_basis_matrix, require_certified

SIDES = ("+", "-")


@dataclass(frozen=True)
class DetectorSpec:
    z: float
    t_grid: np.ndarray
    side: str = "+"

    def __post_init__(self):
        t = np.array(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise InvalidParameterError("t_grid must be a non-empty 1-d array")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidParameterError("t_grid must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "t_grid", t)
        if self.side not in SIDES:
            raise InvalidParameterError(f"side must be '+' or '-', got {self.side!r}")
        if not (np.isfinite(self.z) and self.z > 0):
            raise InvalidParameterError("z is the detector distance from the slab centre and must be > 0")

    def check_outside(self, params):
        if self.z <= params.slab_half_width:
            raise InvalidParameterError(
                f"detector at z={self.z:g} lies inside the slab (half width {params.slab_half_width:g})"
            )

    @property
    def tau(self):
        return self.t_grid - self.z


@dataclass(frozen=True)
class FieldTrace:
    times: np.ndarray
    envelope: np.ndarray        # complex, units of E0
    retarded_time_origin: float
    field: np.ndarray | None = None   # real total field 2 Re(eps) unless given

    def __post_init__(self):
        if self.field is None:
            object.__setattr__(self, "field", 2.0 * np.real(self.envelope))

    @property
    def tau(self):
        return self.times - self.retarded_time_origin


@dataclass(frozen=True)
class FluxTrace:
    times: np.ndarray
    flux: np.ndarray
    components: dict
    component_rates: dict
    retarded_time_origin: float
    exact: bool = False


@dataclass(frozen=True)
class ModeAmplitude:
    label: str
    omega: complex
    c: np.ndarray           # layer basis, summed over emitting layers
    d: np.ndarray
    c_layers: np.ndarray    # (N_emitting_layer, N) per-layer contributions
    d_layers: np.ndarray
    c_k: np.ndarray
    d_k: np.ndarray
    mean: complex           # c . mu + d . conj(mu)


def ordered_modes(mode_set):
    """Positive-frequency modes, fastest decay first."""
    return sorted(mode_set.positive(), key=lambda m: -m.gamma)


def _residue(mode, params):
    v = mode.layer_weight
    v = v[:, None] if v.ndim == 1 else v
    _, ds = _s_and_ds(mode.omega, params)
    return v @ np.linalg.solve(v.T @ ds @ v, v.T)


def _signed_positions(params, side):
    z = layer_positions(params)
    return z if side == "+" else -z


def mode_amplitudes(mode_set, moments, params, side="+"):
    """Per-mode emission coefficients for the given detector side."""
    w_mat = dft_matrix(params.n_layers).conj().T     # B_l = W B_k
    mu_l = w_mat @ moments.mean if moments is not None else None
    zl = _signed_positions(params, side)
    out = []
    for mode in ordered_modes(mode_set):
        w = mode.omega
        r = _residue(mode, params)
        ph = np.exp(-1j * w * zl)
        layers = (ph[:, None] * r) / math.sqrt(2)
        cl = (w + 1) * layers
        dl = (w - 1) * layers
        c = cl.sum(axis=0)
        d = dl.sum(axis=0)
        mean = complex(c @ mu_l + d @ mu_l.conj()) if mu_l is not None else 0j
        out.append(ModeAmplitude(
            label=mode.label, omega=w, c=c, d=d, c_layers=cl, d_layers=dl,
            c_k=c @ w_mat, d_k=d @ w_mat.conj(), mean=mean,
        ))
    return out


def _active_masks(tau, params, side, causal):
    """Boolean (T, N) array: which layers have reached the detector at tau."""
    tau = np.asarray(tau, dtype=float)
    if causal == "center":
        on = tau >= 0
        return np.repeat(on[:, None], params.n_layers, axis=1)
    if causal != "layer":
        raise ValueError(f"causal must be 'center' or 'layer', got {causal!r}")
    zl = _signed_positions(params, side)
    # layer at z_l is heard from tau = -z_l on
    return tau[:, None] + zl[None, :] >= 0


def field_trace(mode_set, moments, detector, params, causal="center"):
    """Mean envelope <eps(z, t)> on the detector grid.

    causal='center' switches every mode on at tau = 0 (light cone measured
    from the slab centre).  causal='layer' lets each layer's contribution
    start when its own retarded time is reached; the two agree once all
    layers are heard, tau >= (N-1) a / 2.
    """
    require_certified(mode_set)
    detector.check_outside(params)
    amps = mode_amplitudes(mode_set, moments, params, detector.side)
    tau = detector.tau
    w_mat = dft_matrix(params.n_layers).conj().T
    mu_l = w_mat @ moments.mean
    masks = _active_masks(tau, params, detector.side, causal)
    env = np.zeros(tau.shape, dtype=complex)
    for a in amps:
        # contribution of each emitting layer to the mean amplitude
        per_layer = a.c_layers @ mu_l + a.d_layers @ mu_l.conj()
        coef = masks.astype(complex) @ per_layer
        env += coef * np.exp(-1j * a.omega * np.where(masks.any(axis=1), tau, 0.0))
    env[~masks.any(axis=1)] = 0.0
    return FieldTrace(times=detector.t_grid.copy(), envelope=env, retarded_time_origin=detector.z)


def _flux_matrix(cs, ds, n, m):
    """T[m, m'] = <:(c_m B + d_m B^dag)^dag (c_m' B + d_m' B^dag):>."""
    cs = np.asarray(cs)
    ds = np.asarray(ds)
    cc = cs.conj()
    dc = ds.conj()
    return (cc @ n @ cs.T + cc @ np.conj(m) @ ds.T + dc @ m @ cs.T + dc @ n.T @ ds.T)


def _pair_matrix(cs, ds, n, m):
    """U[m, m'] = <:(c_m B + d_m B^dag)(c_m' B + d_m' B^dag):>."""
    cs = np.asarray(cs)
    ds = np.asarray(ds)
    return cs @ m @ cs.T + cs @ n.T @ ds.T + ds @ n @ cs.T + ds @ np.conj(m) @ ds.T


def _flux_eval(amps, n, m, tau, masks, exact):
    omegas = np.array([a.omega for a in amps])
    out = np.zeros(tau.shape, dtype=float)
    keys, inv = np.unique(masks, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    for j, key in enumerate(keys):
        if not key.any():
            continue
        sel = inv == j
        cs = np.array([a.c_layers[key].sum(axis=0) for a in amps])
        ds = np.array([a.d_layers[key].sum(axis=0) for a in amps])
        t = tau[sel]
        tm = _flux_matrix(cs, ds, n, m)
        ph = np.exp(1j * np.multiply.outer(t, omegas.conj()[:, None] - omegas[None, :]))
        val = np.einsum("tab,ab->t", ph, tm).real
        if exact:
            um = _pair_matrix(cs, ds, n, m)
            ph2 = np.exp(-1j * np.multiply.outer(t, omegas[:, None] + omegas[None, :]))
            val = val + np.einsum("tab,ab->t", ph2, um).real
        out[sel] = val
    return out


def component_names(mode_set):
    labels = [mo.label for mo in ordered_modes(mode_set)]
    names = []
    for i, a in enumerate(labels):
        for b in labels[i:]:
            names.append((a, b))
    return names


def _component_moments(p, n_l, m_l, i, j):
    """Layer-basis (n, m) keeping only mode-basis entries (i, j) and (j, i)."""
    pinv = np.linalg.inv(p)
    nt = p.conj() @ n_l @ p.T
    mt = p @ m_l @ p.T
    keep = np.zeros(nt.shape, dtype=bool)
    keep[i, j] = keep[j, i] = True
    nk = np.where(keep, nt, 0)
    mk = np.where(keep, mt, 0)
    return pinv.conj() @ nk @ pinv.T, pinv @ mk @ pinv.T


def flux_trace(mode_set, moments, detector, params, exact=False, causal="center"):
    """Normally ordered flux <S(z, t)>/S0 with its mode-pair components.

    Components are labelled 'a' (diagonal in mode a) and 'a|b' (cross term of
    modes a and b).  They are obtained by restricting the mode-basis second
    moments to the corresponding entries, so they add up to the total and
    every cross term vanishes for a state diagonal in the mode basis.
    With exact=True the oscillating <:eps eps:> part is added to the total
    and reported as component 'osc'.
    """
    require_certified(mode_set)
    detector.check_outside(params)
    amps = mode_amplitudes(mode_set, None, params, detector.side)
    _, n_l, m_l = moments.to_layer_basis()
    tau = detector.tau
    masks = _active_masks(tau, params, detector.side, causal)
    modes = ordered_modes(mode_set)
    p_rows = []
    owner = []
    for k, mo in enumerate(modes):
        v = mo.layer_weight
        vs = [v] if v.ndim == 1 else list(v.T)
        p_rows.extend(vs)
        owner.extend([k] * len(vs))
    p = np.array(p_rows)
    owner = np.array(owner)

    total = _flux_eval(amps, n_l, m_l, tau, masks, False)
    comps, rates = {}, {}
    for ia, ib in [(i, j) for i in range(len(modes)) for j in range(i, len(modes))]:
        name = modes[ia].label if ia == ib else f"{modes[ia].label}|{modes[ib].label}"
        acc = np.zeros_like(total)
        rows_a = np.flatnonzero(owner == ia)
        rows_b = np.flatnonzero(owner == ib)
        done = set()
        for i in rows_a:
            for j in rows_b:
                key = (min(i, j), max(i, j))
                if key in done:
                    continue
                done.add(key)
                nk, mk = _component_moments(p, n_l, m_l, i, j)
                acc += _flux_eval(amps, nk, mk, tau, masks, False)
        comps[name] = acc
        rates[name] = modes[ia].gamma + modes[ib].gamma
    flux = total
    if exact:
        full = _flux_eval(amps, n_l, m_l, tau, masks, True)
        comps["osc"] = full - total
        rates["osc"] = float("nan")
        flux = full
    return FluxTrace(times=detector.t_grid.copy(), flux=flux, components=comps,
                     component_rates=rates, retarded_time_origin=detector.z, exact=exact)


def energy_bookkeeping(mode_set, moments, params):
    """Time-integrated flux through both sides, in units of hbar Omega per area.

    Equals the initial excitation number up to O(g, delta0^2) corrections.
    Uses the closed-form time integral of each exp(i(w_m* - w_m') tau) term.
    """
    require_certified(mode_set)
    _, n_l, m_l = moments.to_layer_basis()
    total = 0.0
    for side in SIDES:
        amps = mode_amplitudes(mode_set, None, params, side)
        om = np.array([a.omega for a in amps])
        tm = _flux_matrix([a.c for a in amps], [a.d for a in amps], n_l, m_l)
        kern = 1j / (om.conj()[:, None] - om[None, :])
        total += float(np.sum(tm * kern).real)
    return params.g * total


def energy_bookkeeping_quadrature(mode_set, moments, params, points_per_decade=400):
    """Same quantity by numerical quadrature of flux_trace on a log grid.

    Integrates to 10/Gamma_min and adds the exponential tail of the slowest
    component.
    """
    modes = ordered_modes(mode_set)
    gmin = min(m.gamma for m in modes)
    gmax = max(m.gamma for m in modes)
    t0 = 1e-3 / gmax
    t1 = 10.0 / gmin
    ndec = max(1, int(np.ceil(np.log10(t1 / t0))))
    tau = np.concatenate([[0.0], np.logspace(np.log10(t0), np.log10(t1), ndec * points_per_decade)])
    total = 0.0
    z = params.slab_half_width + 1.0
    for side in SIDES:
        det = DetectorSpec(z=z, t_grid=tau + z, side=side)
        tr = flux_trace(mode_set, moments, det, params)
        total += simpson(tr.flux, x=tau)
        # tail beyond t1 of the slowest diagonal component, rate 2 gamma_min
        total += tr.flux[-1] / (2 * gmin)
    return params.g * total
