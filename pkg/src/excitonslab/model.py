"""Parameters, mode grids and initial-state moments for an N-layer slab.

Internal units: Omega = 1 and c = 1, so times are in 1/Omega and lengths
in c/Omega.  A slab is then fully described by (N, delta0, g) with
delta0 = Omega*a/c and g = eta/Omega.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, UnphysicalStateError

PSD_TOL = 1e-10


def _frozen(arr, dtype=complex):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SlabParams:
    """Dimensionless slab description plus optional physical constants.

    Physical fields are Gaussian-cgs (d in esu*cm, hbar in erg*s) and are
    only used to restore units at I/O time.
    """

    n_layers: int
    delta0: float
    g: float
    omega_phys: float | None = None
    a_phys: float | None = None
    d_phys: float | None = None
    area_phys: float | None = None
    hbar: float | None = None

    def __post_init__(self):
        n = self.n_layers
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise InvalidParameterError(f"n_layers must be an integer >= 1, got {n!r}")
        object.__setattr__(self, "n_layers", int(n))
        if not (np.isfinite(self.delta0) and self.delta0 > 0):
            raise InvalidParameterError(f"delta0 must be > 0, got {self.delta0!r}")
        # g = 0 is allowed for decoupled-limit diagnostics; root finding rejects it
        if not (np.isfinite(self.g) and self.g >= 0):
            raise InvalidParameterError(f"g must be >= 0, got {self.g!r}")
        if self.delta0 > 0.3 or self.g > 0.1:
            warnings.warn(
                f"delta0={self.delta0:g}, g={self.g:g}: perturbative closed forms are "
                "only accurate for delta0, g << 1",
                stacklevel=3,
            )
        phys = (self.omega_phys, self.a_phys, self.d_phys, self.hbar)
        if any(p is not None for p in phys):
            if any(p is None for p in phys):
                raise InvalidParameterError(
                    "physical fields omega_phys, a_phys, d_phys, hbar must be given together"
                )
            if any(p <= 0 for p in phys) or (self.area_phys is not None and self.area_phys <= 0):
                raise InvalidParameterError("physical constants must be > 0")
            g_phys = 4 * math.pi * self.d_phys**2 / (self.hbar * self.a_phys**2 * self.c_phys)
            if abs(g_phys - self.g) > 1e-12 * abs(g_phys):
                raise InvalidParameterError(
                    f"g={self.g!r} inconsistent with physical constants (4 pi d^2/(hbar a^2 c) = {g_phys!r})"
                )

    @property
    def eta(self):
        """Radiative rate scale in units of Omega (equals g)."""
        return self.g

    @property
    def eta_prime(self):
        return self.g * self.delta0**2 / 4

    @property
    def a(self):
        """Lattice constant in units of c/Omega."""
        return self.delta0

    @property
    def slab_half_width(self):
        return 0.5 * (self.n_layers - 1) * self.delta0

    @property
    def has_physical(self):
        return self.omega_phys is not None

    @property
    def c_phys(self):
        if self.omega_phys is None:
            return None
        return self.omega_phys * self.a_phys / self.delta0

    def unit_factors(self):
        """Conversion factors from internal units to physical ones.

        Returns a dict; E0 and S0 are present only when the layer area is known.
        """
        out = {
            "time_unit": "1/Omega",
            "length_unit": "c/Omega",
            "field_unit": "E0 = sqrt(2 pi eta hbar Omega / (c A))",
            "flux_unit": "S0 = eta hbar Omega / A",
        }
        if not self.has_physical:
            return out
        w = self.omega_phys
        eta = self.g * w
        out.update(time_s=1.0 / w, length_cm=self.c_phys / w, eta_rad_s=eta)
        if self.area_phys is not None:
            out["E0"] = math.sqrt(2 * math.pi * eta * self.hbar * w / (self.c_phys * self.area_phys))
            out["S0"] = eta * self.hbar * w / self.area_phys
        return out

    def replace(self, **kw):
        d = dict(
            n_layers=self.n_layers, delta0=self.delta0, g=self.g, omega_phys=self.omega_phys,
            a_phys=self.a_phys, d_phys=self.d_phys, area_phys=self.area_phys, hbar=self.hbar,
        )
        d.update(kw)
        return SlabParams(**d)


def derive_dimensionless(omega_phys, a_phys, d_phys, hbar, c, n_layers=1, area=None):
    """Build SlabParams from physical constants (Gaussian units).

    delta0 = Omega a / c and g = 4 pi d^2 / (hbar a^2 c), the latter being
    eta/Omega with f^2 = 8 pi Omega d^2/(hbar a^3) and eta = a f^2/(2c).
    """
    vals = dict(omega_phys=omega_phys, a_phys=a_phys, d_phys=d_phys, hbar=hbar, c=c)
    for k, v in vals.items():
        if v is None or not np.isfinite(v) or v <= 0:
            raise InvalidParameterError(f"{k} must be > 0, got {v!r}")
    if area is not None and area <= 0:
        raise InvalidParameterError(f"area must be > 0, got {area!r}")
    delta0 = omega_phys * a_phys / c
    g = 4 * math.pi * d_phys**2 / (hbar * a_phys**2 * c)
    return SlabParams(
        n_layers=n_layers, delta0=delta0, g=g, omega_phys=omega_phys, a_phys=a_phys,
        d_phys=d_phys, area_phys=area, hbar=hbar,
    )


@dataclass(frozen=True)
class ModeGrid:
    m_values: tuple
    k_values: np.ndarray  # units of 1/a
    l_values: tuple

    @property
    def n(self):
        return len(self.m_values)


def build_mode_grid(n_layers):
    """Symmetric wave-number and layer index grid for N layers."""
    if isinstance(n_layers, bool) or int(n_layers) != n_layers or n_layers < 1:
        raise InvalidParameterError(f"N must be an integer >= 1, got {n_layers!r}")
    n = int(n_layers)
    half = (n - 1) / 2
    idx = tuple(j - half for j in range(n))
    # integers stay integers for odd N
    if n % 2 == 1:
        idx = tuple(int(v) for v in idx)
    k = _frozen([2 * math.pi * m / n for m in idx], dtype=float)
    return ModeGrid(m_values=idx, k_values=k, l_values=idx)


def layer_positions(params):
    """z-coordinates of the layers in units of c/Omega."""
    grid = build_mode_grid(params.n_layers)
    return np.array(grid.l_values, dtype=float) * params.delta0


def dft_matrix(n_layers):
    """U with B_k = sum_l U[k, l] B_l, U[k, l] = exp(-i k l a)/sqrt(N).

    Rows follow ascending m, columns ascending l.
    """
    grid = build_mode_grid(n_layers)
    m = np.array(grid.m_values, dtype=float)
    l = np.array(grid.l_values, dtype=float)
    return np.exp(-2j * np.pi * np.outer(m, l) / n_layers) / np.sqrt(n_layers)


@dataclass(frozen=True)
class ComplexFrequency:
    re: float
    im: float
    label: str = ""

    @property
    def omega(self):
        return complex(self.re, self.im)

    @property
    def gamma(self):
        return -self.im


@dataclass(frozen=True)
class ExcitonMoments:
    """First and second moments of the initial exciton state in the k basis.

    normal[k, k'] = <B_k^dag B_k'> and anomalous[k, k'] = <B_k B_k'>.
    ``kind`` records which family the state came from (informational).
    """

    mean: np.ndarray
    normal: np.ndarray
    anomalous: np.ndarray
    kind: str = "raw"

    def __post_init__(self):
        mu = _frozen(self.mean)
        n = _frozen(self.normal)
        m = _frozen(self.anomalous)
        k = mu.shape[0]
        if mu.ndim != 1 or n.shape != (k, k) or m.shape != (k, k):
            raise InvalidParameterError("moment shapes must be (N,), (N,N), (N,N)")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "anomalous", m)
        check_physical(mu, n, m)

    @property
    def n_modes(self):
        return self.mean.shape[0]

    @property
    def excitation_number(self):
        return float(np.trace(self.normal).real)

    def transformed(self, t, kind=None):
        """Moments of B' = T B (T need not be unitary)."""
        return ExcitonMoments(*transform_moments(self.mean, self.normal, self.anomalous, t),
                              kind=kind or self.kind)

    def to_layer_basis(self):
        """Return (mean, normal, anomalous) for the layer operators B_l."""
        w = dft_matrix(self.n_modes).conj().T
        return transform_moments(self.mean, self.normal, self.anomalous, w)


def transform_moments(mu, n, m, t):
    t = np.asarray(t, dtype=complex)
    return t @ mu, t.conj() @ n @ t.T, t @ m @ t.T


def augmented_covariance(mu, n, m):
    """Covariance of (B, B^dag): must be positive semidefinite for a bosonic state."""
    mu = np.asarray(mu, dtype=complex)
    k = mu.shape[0]
    big = np.block([[np.asarray(n).T + np.eye(k), m], [np.conj(m), n]])
    v = np.concatenate([mu, mu.conj()])
    return big - np.outer(v, v.conj())


def check_physical(mu, n, m, tol=PSD_TOL):
    n = np.asarray(n)
    m = np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(n), initial=0.0)), float(np.max(np.abs(m), initial=0.0)))
    if not np.allclose(n, n.conj().T, atol=tol * scale, rtol=0):
        raise UnphysicalStateError("normal moments must be Hermitian")
    if not np.allclose(m, m.T, atol=tol * scale, rtol=0):
        raise UnphysicalStateError("anomalous moments must be symmetric")
    ev = np.linalg.eigvalsh(0.5 * (n + n.conj().T))
    if ev.size and ev.min() < -tol * scale:
        raise UnphysicalStateError(f"normal moments have negative eigenvalue {ev.min():.3e}")
    cov = augmented_covariance(mu, n, m)
    ev = np.linalg.eigvalsh(0.5 * (cov + cov.conj().T))
    if ev.min() < -tol * scale * max(1.0, float(np.vdot(mu, mu).real)):
        raise UnphysicalStateError(
            f"augmented covariance not positive semidefinite (min eigenvalue {ev.min():.3e})"
        )


def as_complex(v):
    """Parse a complex scalar given as number, 'a+bj' string, or [re, im] pair."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidParameterError(f"complex pair must have 2 entries, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    return complex(v)


def _vector(values, n, what):
    arr = np.array([as_complex(v) for v in values], dtype=complex)
    if arr.shape != (n,):
        raise InvalidParameterError(f"{what} needs {n} entries, got {len(arr)}")
    return arr


def moments_from_state_spec(spec, n_layers=None, mode_basis=None):
    """Build ExcitonMoments (k basis) from a plain-dict state description.

    spec keys:
      kind: coherent | fock | chaotic | raw
      basis: k (default) | layer | mode
      amplitudes (coherent), occupations (fock/chaotic),
      mean/normal/anomalous (raw).
    ``mode_basis`` is the matrix P (rows = layer-basis mode vectors, b = P B_l)
    required for basis 'mode'; see spectrum.mode_basis_matrix.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    basis = spec.pop("basis", "k")
    if kind not in ("coherent", "fock", "chaotic", "raw"):
        raise InvalidParameterError(f"unknown state kind {kind!r}")
    if basis not in ("k", "layer", "mode"):
        raise InvalidParameterError(f"unknown basis {basis!r}")
    n = n_layers
    if kind == "coherent":
        vals = spec.pop("amplitudes")
        n = n or len(vals)
        mu = _vector(vals, n, "amplitudes")
        nm = np.outer(mu.conj(), mu)
        am = np.outer(mu, mu)
    elif kind in ("fock", "chaotic"):
        vals = spec.pop("occupations")
        n = n or len(vals)
        occ = np.array([float(v) for v in vals])
        if occ.shape != (n,):
            raise InvalidParameterError(f"occupations need {n} entries")
        if (occ < 0).any():
            raise UnphysicalStateError("occupations must be >= 0")
        if kind == "fock" and not np.all(occ == np.round(occ)):
            raise InvalidParameterError("fock occupations must be integers")
        mu = np.zeros(n, complex)
        nm = np.diag(occ).astype(complex)
        am = np.zeros((n, n), complex)
    else:
        mean = spec.pop("mean", None)
        normal = spec.pop("normal")
        n = n or len(normal)
        mu = np.zeros(n, complex) if mean is None else _vector(mean, n, "mean")
        nm = np.array([[as_complex(x) for x in row] for row in normal], dtype=complex)
        an = spec.pop("anomalous", None)
        am = np.zeros((n, n), complex) if an is None else np.array(
            [[as_complex(x) for x in row] for row in an], dtype=complex)
    if spec:
        raise InvalidParameterError(f"unexpected state keys {sorted(spec)}")
    if n_layers is not None and n != n_layers:
        raise InvalidParameterError(f"state has {n} modes, slab has {n_layers} layers")

    if basis == "k":
        t = np.eye(n)
    elif basis == "layer":
        t = dft_matrix(n)
    else:
        if mode_basis is None:
            raise InvalidParameterError("basis 'mode' needs the certified mode basis")
        # B_l = P^-1 b, then B_k = U B_l
        t = dft_matrix(n) @ np.linalg.inv(mode_basis)
    # validate in the basis the user gave, then move to k
    check_physical(mu, nm, am)
    mu, nm, am = transform_moments(mu, nm, am, t)
    return ExcitonMoments(mu, nm, am, kind=kind)
