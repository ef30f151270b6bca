"""Brute-force time-domain oracle: excitons coupled to a discretised 1-d photon bath.

In the layer basis the quadratic Hamiltonian (units Omega = c = 1) reads

    H = sum_l B_l^dag B_l + sum_q |q| a_q^dag a_q
        + sum_l [(B_l + B_l^dag) phi_l + phi_l^2],
    phi_l = sum_q g_q (exp(i q z_l) a_q + h.c.),  g_q^2 = g/(2 L |q|),

with q = 2 pi j / L, j = +-1 .. +-j_max.  The phi^2 piece is the
two-photon term.  The uniform q = 0 component of the vector potential is a
free canonical pair (Y, P) with energy P^2/2 entering phi_l as
sqrt(g/L) Y; dropping it would subtract the box average of the field
instantaneously, a 1/L non-causal artefact.  Because H is quadratic the mean amplitudes
beta_l = <B_l>, alpha_q = <a_q> obey a closed linear system, integrated here
with fixed-step RK4.  Nothing from the frequency-domain solution is used.

Detector field (units of E0): E = eps + conj(eps) with
eps(z) = i sum_q sqrt(|q|/(g L)) alpha_q exp(i q z) - P/sqrt(2 g L).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .dynamics import FieldTrace
from .errors import ConfigError, InvalidParameterError, ResolutionError
from .model import layer_positions

Q_MAX_MIN = 20.0
DT_FACTOR = 0.05


@dataclass(frozen=True)
class BathConfig:
    box_length: float
    j_max: int
    dt: float
    two_photon: bool = True
    counter_rotating: bool = True

    @property
    def q_max(self):
        return 2 * math.pi * self.j_max / self.box_length

    @property
    def n_modes(self):
        return 2 * self.j_max

    def q_values(self):
        j = np.arange(1, self.j_max + 1)
        q = 2 * math.pi * j / self.box_length
        return np.concatenate([-q[::-1], q])

    def validate(self, t_max=None, z_detector=None):
        """Raise ConfigError naming the violated bath condition."""
        if self.box_length <= 0 or self.j_max < 1 or self.dt <= 0:
            raise ConfigError("box_length, j_max and dt must be positive")
        if self.q_max < Q_MAX_MIN:
            raise ConfigError(
                f"q_max = {self.q_max:.3g} below {Q_MAX_MIN:g}: raise j_max to at least "
                f"{math.ceil(Q_MAX_MIN * self.box_length / (2 * math.pi))}"
            )
        if self.dt > DT_FACTOR / self.q_max:
            raise ConfigError(
                f"dt = {self.dt:.3g} exceeds {DT_FACTOR:g}/q_max = {DT_FACTOR / self.q_max:.3g}: "
                f"reduce dt to at most {DT_FACTOR / self.q_max:.3g}"
            )
        if t_max is not None:
            reach = t_max + (abs(z_detector) if z_detector is not None else 0.0)
            if self.box_length <= 2 * reach:
                raise ConfigError(
                    f"box_length = {self.box_length:.4g} must exceed 2 (t_max + |z|) = {2 * reach:.4g} "
                    "to avoid wrap-around"
                )


def default_bath(t_max, z_detector=0.0, q_max=40.0, margin=1.1, **kw):
    """Smallest bath meeting the validity conditions for a run of length t_max."""
    length = 2 * margin * (t_max + abs(z_detector)) + 10.0
    j_max = int(math.ceil(q_max * length / (2 * math.pi)))
    q = 2 * math.pi * j_max / length
    dt = DT_FACTOR / q
    return BathConfig(box_length=length, j_max=j_max, dt=dt, **kw)


@dataclass(frozen=True)
class OracleState:
    beta: np.ndarray
    alpha: np.ndarray
    t: float = 0.0
    a0: complex = 0j            # Y + iP of the uniform mode


class _System:
    """Precomputed bath arrays for one (params, config) pair."""

    def __init__(self, params, config):
        self.params = params
        self.config = config
        q = config.q_values()
        self.q = q
        self.wq = np.abs(q)
        self.gq = np.sqrt(params.g / (2 * config.box_length * self.wq)) if params.g > 0 else np.zeros_like(q)
        # the uniform mode only exists with counter-rotating terms (it is real)
        self.kappa = math.sqrt(params.g / config.box_length) if config.counter_rotating else 0.0
        zl = layer_positions(params)
        self.phase = np.exp(1j * np.outer(zl, q))          # (N, M)
        self.gphase = self.phase * self.gq[None, :]
        self.gphase_c = self.gphase.conj()

    def rhs(self, beta, alpha, a0):
        cfg = self.config
        psi = self.gphase @ alpha                          # positive-frequency part of phi_l
        if cfg.counter_rotating:
            phi = psi + psi.conj() + self.kappa * a0.real
            dbeta = -1j * beta - 1j * phi
            src = beta + beta.conj()
            if cfg.two_photon:
                src = src + 2.0 * phi
            da0 = complex(a0.imag, -self.kappa * float(np.sum(src.real)))
        else:
            dbeta = -1j * beta - 1j * psi
            src = beta.astype(complex)
            if cfg.two_photon:
                src = src + 2.0 * psi
            da0 = 0j
        dalpha = -1j * self.wq * alpha - 1j * (src @ self.gphase_c)
        return dbeta, dalpha, da0

    def energy(self, beta, alpha, a0=0j):
        cfg = self.config
        psi = self.gphase @ alpha
        e = float(np.sum(np.abs(beta) ** 2) + np.sum(self.wq * np.abs(alpha) ** 2))
        if cfg.counter_rotating:
            phi = 2 * psi.real + self.kappa * a0.real
            e += 0.5 * a0.imag**2
            e += float(np.sum(2 * beta.real * phi))
            if cfg.two_photon:
                e += float(np.sum(phi**2))
        else:
            e += float(np.sum(2 * (beta.conj() * psi).real))
            if cfg.two_photon:
                e += float(np.sum(2 * np.abs(psi) ** 2))
        return e

    def detector_weights(self, z):
        return 1j * np.sqrt(self.wq / (self.params.g * self.config.box_length)) * np.exp(1j * self.q * z)

    def uniform_weight(self):
        # E from the uniform mode is -sqrt(2/(g L)) P; half of it goes into eps
        if self.kappa == 0.0:
            return 0.0
        return -1.0 / math.sqrt(2 * self.params.g * self.config.box_length)

    def field(self, alpha, z, a0=0j):
        return complex(np.sum(self.detector_weights(z) * alpha) + self.uniform_weight() * a0.imag)


def _rk4(sysm, beta, alpha, a0, dt):
    k1b, k1a, k1z = sysm.rhs(beta, alpha, a0)
    k2b, k2a, k2z = sysm.rhs(beta + 0.5 * dt * k1b, alpha + 0.5 * dt * k1a, a0 + 0.5 * dt * k1z)
    k3b, k3a, k3z = sysm.rhs(beta + 0.5 * dt * k2b, alpha + 0.5 * dt * k2a, a0 + 0.5 * dt * k2z)
    k4b, k4a, k4z = sysm.rhs(beta + dt * k3b, alpha + dt * k3a, a0 + dt * k3z)
    beta = beta + (dt / 6) * (k1b + 2 * k2b + 2 * k3b + k4b)
    alpha = alpha + (dt / 6) * (k1a + 2 * k2a + 2 * k3a + k4a)
    a0 = a0 + (dt / 6) * (k1z + 2 * k2z + 2 * k3z + k4z)
    return beta, alpha, a0


def step_equations(state, config, params):
    """Advance (beta, alpha) by one RK4 step of size config.dt."""
    config.validate()
    sysm = _System(params, config)
    beta = np.asarray(state.beta, dtype=complex)
    alpha = np.asarray(state.alpha, dtype=complex)
    if alpha.shape != (config.n_modes,) or beta.shape != (params.n_layers,):
        raise ConfigError("state shape does not match bath/slab")
    b, a, z0 = _rk4(sysm, beta, alpha, complex(state.a0), config.dt)
    return OracleState(beta=b, alpha=a, t=state.t + config.dt, a0=z0)


def energy(state, config, params):
    return _System(params, config).energy(np.asarray(state.beta, complex), np.asarray(state.alpha, complex),
                                          complex(state.a0))


@dataclass(frozen=True)
class OracleRun:
    times: np.ndarray
    beta: np.ndarray            # (T, N) layer amplitudes
    detectors: tuple            # signed z positions
    envelopes: dict             # z -> complex positive-frequency field
    fields: dict                # z -> real total field
    energy: np.ndarray
    config: BathConfig
    params: object
    final: OracleState


def simulate(params, beta0, config, t_max, detectors=(), sample_every=None, basis="layer"):
    """Integrate from vacuum bath and exciton amplitudes beta0.

    beta0 is given in the layer basis (basis='layer') or the k basis.
    ``detectors`` are signed z positions; the field there is recorded every
    ``sample_every`` steps (default: about 2000 samples in total).
    """
    detectors = tuple(float(z) for z in detectors)
    zmax = max([abs(z) for z in detectors], default=0.0)
    config.validate(t_max=t_max, z_detector=zmax)
    if detectors and params.g == 0:
        raise InvalidParameterError("the field unit E0 vanishes at g = 0; run without detectors")
    for z in detectors:
        if abs(z) <= params.slab_half_width:
            raise InvalidParameterError(f"detector z={z:g} inside the slab")
    beta = np.asarray(beta0, dtype=complex).copy()
    if basis == "k":
        from .model import dft_matrix
        beta = dft_matrix(params.n_layers).conj().T @ beta
    sysm = _System(params, config)
    alpha = np.zeros(config.n_modes, dtype=complex)
    a0 = 0j
    nsteps = int(math.ceil(t_max / config.dt))
    if sample_every is None:
        sample_every = max(1, nsteps // 2000)
    # per-detector weights for eps(z)
    dvec = np.array([sysm.detector_weights(z) for z in detectors]).reshape(len(detectors), sysm.q.size)
    uw = sysm.uniform_weight()
    times, betas, envs, ens = [], [], [], []

    def record(t):
        times.append(t)
        betas.append(beta.copy())
        envs.append(dvec @ alpha + uw * a0.imag if detectors else np.zeros(0))
        ens.append(sysm.energy(beta, alpha, a0))

    record(0.0)
    for step in range(1, nsteps + 1):
        beta, alpha, a0 = _rk4(sysm, beta, alpha, a0, config.dt)
        if step % sample_every == 0:
            record(step * config.dt)
    envs = np.array(envs)
    env_d = {z: envs[:, i] for i, z in enumerate(detectors)}
    fld_d = {z: 2 * envs[:, i].real for i, z in enumerate(detectors)}
    return OracleRun(
        times=np.array(times), beta=np.array(betas), detectors=detectors, envelopes=env_d,
        fields=fld_d, energy=np.array(ens), config=config, params=params,
        final=OracleState(beta=beta, alpha=alpha, t=nsteps * config.dt, a0=a0),
    )


def detector_field(state_history, z, config=None):
    """FieldTrace at signed position z recorded during simulate()."""
    run = state_history
    z = float(z)
    if z not in run.envelopes:
        raise InvalidParameterError(f"no detector recorded at z={z:g}; pass it to simulate()")
    return FieldTrace(times=run.times.copy(), envelope=run.envelopes[z],
                      retarded_time_origin=abs(z), field=run.fields[z])


# ------------------------------------------------------------------ fitting
@dataclass(frozen=True)
class FittedMode:
    gamma: float
    omega: float
    amplitude: complex
    gamma_std: float
    omega_std: float


def matrix_pencil(t, y, n_terms, max_rows=2000, max_pencil=100):
    """Complex exponents s_j with y ~ sum c_j exp(s_j t) (uniform t assumed).

    Long records use a strided subset of the Hankel rows: every row is still
    a window of consecutive samples, so the shift relation holds row by row.
    """
    y = np.asarray(y, dtype=complex)
    dt = t[1] - t[0]
    n = y.size
    lp = max(n_terms + 1, min(n // 3, max_pencil))
    starts = np.arange(n - lp)
    if starts.size > max_rows:
        starts = starts[:: int(math.ceil(starts.size / max_rows))]
    hank = y[starts[:, None] + np.arange(lp + 1)[None, :]]
    y0, y1 = hank[:, :-1], hank[:, 1:]
    u, sv, vh = np.linalg.svd(y0, full_matrices=False)
    k = n_terms
    u, sv, vh = u[:, :k], sv[:k], vh[:k]
    a = np.diag(1 / sv) @ u.conj().T @ y1 @ vh.conj().T
    z = np.linalg.eigvals(a)
    return np.log(z.astype(complex)) / dt


def fit_exponentials(t, y, n_terms, real_pairs=False, s0=None):
    """Nonlinear least-squares fit of a sum of damped complex exponentials.

    With real_pairs the model is sum_j 2 Re(c_j exp(s_j t)), for real data.
    Returns a list of FittedMode with Gamma = -Re s and Omega = -Im s.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y)
    t0 = t[0]
    tt = t - t0
    scale = float(np.max(np.abs(y))) or 1.0
    yn = y / scale
    if s0 is None:
        if real_pairs:
            s_all = matrix_pencil(tt, yn.astype(complex), 2 * n_terms)
            s0 = sorted(s_all, key=lambda s: (-s.imag if s.imag < 0 else np.inf, s.real))[:n_terms]
            s0 = [s if s.imag <= 0 else s.conjugate() for s in s0]
        else:
            s0 = matrix_pencil(tt, yn, n_terms)
    s0 = np.asarray(s0, dtype=complex)
    tspan = tt[-1] if tt[-1] > 0 else 1.0
    basis = np.exp(np.outer(tt, s0))
    c0 = np.linalg.lstsq(basis if not real_pairs else np.hstack([basis, basis.conj()]),
                         yn.astype(complex), rcond=None)[0][: len(s0)]

    def model(p):
        k = len(s0)
        s = p[0:k] / tspan + 1j * p[k:2 * k] / tspan
        c = p[2 * k:3 * k] + 1j * p[3 * k:4 * k]
        m = np.exp(np.outer(tt, s)) @ c
        return 2 * m.real if real_pairs else m

    def resid(p):
        r = model(p) - yn
        return np.concatenate([r.real, r.imag]) if np.iscomplexobj(r) else r

    p0 = np.concatenate([s0.real * tspan, s0.imag * tspan, c0.real, c0.imag])
    sol = least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    k = len(s0)
    jac = sol.jac
    dof = max(1, resid(sol.x).size - sol.x.size)
    s2 = float(np.sum(sol.fun**2)) / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
    except np.linalg.LinAlgError:
        cov = np.full((sol.x.size, sol.x.size), np.inf)
    out = []
    for j in range(k):
        sr, si = sol.x[j] / tspan, sol.x[k + j] / tspan
        amp = complex(sol.x[2 * k + j], sol.x[3 * k + j]) * scale * np.exp(-complex(sr, si) * t0)
        out.append(FittedMode(
            gamma=-sr, omega=-si, amplitude=amp,
            gamma_std=math.sqrt(max(cov[j, j], 0.0)) / tspan,
            omega_std=math.sqrt(max(cov[k + j, k + j], 0.0)) / tspan,
        ))
    return sorted(out, key=lambda f: -abs(f.amplitude))


def extract_rates(trace, n_modes=1, tau_min=0.0, bath=None, rel_std_max=0.5):
    """Fit decay rates and frequencies from a FieldTrace after the light cone.

    Fits the real total field with damped cosine pairs.  The oracle's complex
    envelope is not a clean positive-frequency signal while the source acts,
    so it is not used.  Raises ResolutionError when a fitted rate is below
    the bath frequency spacing 2 pi/L or is not determined by the data.
    """
    tau = trace.tau
    sel = tau >= tau_min
    t = tau[sel]
    y = np.asarray(trace.field)[sel]
    if t.size < 4 * n_modes + 4:
        raise ResolutionError("too few samples after the light cone for a fit")
    fits = fit_exponentials(t, y, n_modes, real_pairs=True)
    spacing = 2 * math.pi / bath.box_length if bath is not None else 0.0
    for f in fits:
        if f.gamma <= spacing or not np.isfinite(f.gamma_std) or f.gamma_std > rel_std_max * abs(f.gamma):
            hint = "" if bath is None else f" (bath spacing 2 pi/L = {spacing:.3g})"
            raise ResolutionError(
                f"rate {f.gamma:.3g} +- {f.gamma_std:.2g} not resolved{hint}; "
                "enlarge box_length and extend t_max to cover more lifetimes"
            )
    return sorted(fits, key=lambda f: -f.gamma)


# ------------------------------------------------------- second moments
def green_runs(params, config, t_max, detectors, sample_every=None):
    """Runs from beta = e_l and beta = i e_l for each layer (basis responses).

    Returned dict maps (l, 'r'|'i') to OracleRun.  Any mean-field response is
    a real-linear combination of these.
    """
    out = {}
    n = params.n_layers
    for l in range(n):
        for tag, val in (("r", 1.0), ("i", 1j)):
            b = np.zeros(n, dtype=complex)
            b[l] = val
            out[(l, tag)] = simulate(params, b, config, t_max, detectors, sample_every)
    return out


def flux_from_green_runs(runs, moments, z, exact=False):
    """Normally ordered flux <S>/S0 at z assembled from the basis responses.

    eps(t) = sum_l G_l B_l + H_l B_l^dag with G = (E(e) - i E(ie))/2 and
    H = (E(e) + i E(ie))/2, where E(.) is the recorded envelope.
    """
    keys = sorted({k[0] for k in runs})
    n = len(keys)
    e_r = np.array([runs[(l, "r")].envelopes[z] for l in keys])
    e_i = np.array([runs[(l, "i")].envelopes[z] for l in keys])
    gg = 0.5 * (e_r - 1j * e_i)     # (N, T)
    hh = 0.5 * (e_r + 1j * e_i)
    _, nl, ml = moments.to_layer_basis()
    gc, hc = gg.conj(), hh.conj()
    flux = (np.einsum("it,ij,jt->t", gc, nl, gg) + np.einsum("it,ij,jt->t", gc, np.conj(ml), hh)
            + np.einsum("it,ij,jt->t", hc, ml, gg) + np.einsum("it,ji,jt->t", hc, nl, hh))
    if exact:
        flux = flux + (np.einsum("it,ij,jt->t", gg, ml, gg) + np.einsum("it,ji,jt->t", gg, nl, hh)
                       + np.einsum("it,ij,jt->t", hh, nl, gg)
                       + np.einsum("it,ij,jt->t", hh, np.conj(ml), hh)).real
    times = runs[(keys[0], "r")].times
    return times, flux.real
