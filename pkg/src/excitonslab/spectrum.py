"""Secular function, certified complex eigenfrequencies and eigenmode weights.

The secular matrix in the layer basis is

    S(w) = (w^2 - 1) I + i g w E(w),   E_ll' = exp(i w a |l - l'|),

which is (w^2 - 1) I - 2 w^2 F(w) written without the 1/w pole.  Roots of
det S with Re w > 0 are the radiative modes w_m = Omega_m - i Gamma_m;
their partners sit at -conj(w_m).

S commutes with the layer reflection l -> -l, so det S factorises into
an even and an odd block.  Zeros are counted per block with the argument
principle, isolated by bisection and polished by damped Newton steps
using f'/f = tr(S^-1 S') (Jacobi's formula).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import Box, winding_number
from .coupling import LABEL_ORDER, d_matrix_exact
from .errors import (BoundaryZeroError, CertificationError, DegenerateTransformError,
                     InvalidParameterError, SingularFrequencyError, UnsupportedError)
from .model import ComplexFrequency, build_mode_grid, dft_matrix

RESIDUAL_TOL = 1e-10
CLUSTER_TOL = 1e-8
SPLIT_FRACTIONS = (0.5, 0.4871, 0.5237, 0.4419, 0.5683)


@dataclass(frozen=True)
class SecularMatrix:
    omega: complex
    s: np.ndarray
    basis: str = "k"


def _distance(n):
    l = np.arange(n)
    return np.abs(l[:, None] - l[None, :]).astype(float)


def _s_and_ds(omega, params):
    """Layer-basis S(w) and dS/dw for an array of frequencies (shape (..., N, N))."""
    w = np.asarray(omega, dtype=complex)[..., None, None]
    n = params.n_layers
    dist = _distance(n)
    ph = np.exp(1j * params.delta0 * w * dist)
    eye = np.eye(n)
    g = params.g
    s = (w - 1.0) * (w + 1.0) * eye + 1j * g * w * ph
    ds = 2.0 * w * eye + 1j * g * (ph + w * (1j * params.delta0 * dist) * ph)
    return s, ds


def secular_matrix(omega, params, basis="k"):
    omega = complex(omega)
    if omega == 0:
        raise SingularFrequencyError("the secular matrix is not defined at w = 0")
    s, _ = _s_and_ds(omega, params)
    if basis == "k":
        u = dft_matrix(params.n_layers)
        s = u @ s @ u.conj().T
    elif basis != "layer":
        raise ValueError(f"unknown basis {basis!r}")
    return SecularMatrix(omega=omega, s=s, basis=basis)


def secular_det(omega, params):
    omega = complex(omega)
    if omega == 0:
        raise SingularFrequencyError("the secular matrix is not defined at w = 0")
    return complex(np.linalg.det(_s_and_ds(omega, params)[0]))


def secular_factors_n2(omega, params):
    """The two N=2 factors w^2 + i g w - 1 +- i g w exp(i w a) (even, odd)."""
    w = complex(omega)
    base = w * w + 1j * params.g * w - 1
    cross = 1j * params.g * w * np.exp(1j * w * params.delta0)
    return base + cross, base - cross


def secular_sextic_n3(omega, params):
    """det[(w^2 - 1) I + (g w/3) D] expanded in the entries A, B, C, E of D."""
    w = complex(omega)
    d = d_matrix_exact(w, params.delta0)
    a_, b_, c_, e_ = d[0, 0], d[1, 1], d[0, 1], d[0, 2]
    x = w * w - 1
    p = params.g * w / 3
    return (x**3 + p * (b_ + 2 * a_) * x**2
            + p**2 * (2 * a_ * b_ + a_**2 - e_**2 - 2 * c_**2) * x
            + p**3 * ((a_**2 - e_**2) * b_ + 2 * c_**2 * (e_ - a_)))


def parity_basis(n):
    """Orthogonal Q = [even | odd] block-diagonalising reflection-symmetric matrices."""
    even, odd = [], []
    for j in range((n + 1) // 2):
        jj = n - 1 - j
        v = np.zeros(n)
        if j == jj:
            v[j] = 1.0
            even.append(v)
            continue
        v[j] = v[jj] = 1 / math.sqrt(2)
        even.append(v)
        u = np.zeros(n)
        u[j], u[jj] = 1 / math.sqrt(2), -1 / math.sqrt(2)
        odd.append(u)
    qe = np.array(even).T
    qo = np.array(odd).T if odd else np.zeros((n, 0))
    return qe, qo


def _block_function(params, q):
    """func(z) -> (det of block, f'/f) for the block spanned by columns of q."""
    scale = params.g if params.g > 0 else 1.0

    def func(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        s, ds = _s_and_ds(z, params)
        sb = q.T @ s @ q / scale
        dsb = q.T @ ds @ q / scale
        det = np.linalg.det(sb)
        dl = np.empty(z.shape, dtype=complex)
        ok = det != 0
        if ok.any():
            dl[ok] = np.trace(np.linalg.solve(sb[ok], dsb[ok]), axis1=-2, axis2=-1)
        dl[~ok] = np.inf
        return det, dl

    return func


def _blocks(params):
    qe, qo = parity_basis(params.n_layers)
    out = [(+1, qe)]
    if qo.shape[1]:
        out.append((-1, qo))
    return out


def default_box(params):
    """Rectangle around +Omega holding all N radiative roots with wide margin.

    For strong coupling the real range is clamped to [0.5, 1.5] and the
    depth to 0.9 so that the box stays clear of w = 0.
    """
    g, d, n = params.g, params.delta0, params.n_layers
    half = 20 * g + 5 * g * d
    return Box(max(1 - half, 0.5), min(1 + half, 1.5), -min(20 * g * n, 0.9), 0.0)


def count_zeros(params, box, n0=64):
    """Argument-principle zero count of det S in box, summed over parity blocks."""
    if box.contains_origin():
        raise InvalidParameterError("search box must exclude w = 0")
    return sum(winding_number(_block_function(params, q), box, n0=n0) for _, q in _blocks(params))


@dataclass(frozen=True)
class EigenMode:
    label: str
    frequency: ComplexFrequency
    weight: np.ndarray          # k basis, (N,) or (N, mult)
    layer_weight: np.ndarray    # layer basis
    parity: int
    multiplicity: int = 1
    box: Box | None = None
    winding: int | None = None
    residual: float = float("nan")
    newton_trace: tuple = ()
    certified: bool = False

    @property
    def omega(self):
        return self.frequency.omega

    @property
    def gamma(self):
        return self.frequency.gamma


@dataclass(frozen=True)
class EigenModeSet:
    modes: tuple
    params: object
    n_expected: int
    certified: bool = False
    search_box: Box | None = None
    pairing_ok: bool = False

    @property
    def omegas(self):
        return np.array([m.omega for m in self.modes])

    def positive(self):
        return [m for m in self.modes if m.omega.real > 0]

    def by_label(self, label):
        for m in self.modes:
            if m.label == label:
                return m
        raise KeyError(label)

    @property
    def labels(self):
        return [m.label for m in self.modes]

    @property
    def count(self):
        return sum(m.multiplicity for m in self.modes)


# ------------------------------------------------------------ perturbative
def perturbative_roots(params):
    """Closed-form small-(g, delta0) roots for N = 1, 2, 3 (uncertified)."""
    n, g, d = params.n_layers, params.g, params.delta0
    if n == 1:
        # exact roots of w^2 + i g w - 1 = 0
        sq = math.sqrt(max(1 - g * g / 4, 0.0))
        table = [("mono", sq, g / 2, +1)]
    elif n == 2:
        table = [("1", 1 - g * g / 2 + g * d / 2, g, +1),
                 ("2", 1 - g * d / 2, g * d * d / 4, -1)]
    elif n == 3:
        table = [("0", 1 - 9 * g * g / 8 + 4 * g * d / 3, 1.5 * g, +1),
                 ("1", 1 - g * d / 3, g * d * d / 27, +1),
                 ("-1", 1 - g * d, g * d * d, -1)]
    else:
        raise UnsupportedError("closed-form roots exist for N <= 3 only")
    modes = []
    for label, om, gam, par in table:
        for sign, suffix in ((1, ""), (-1, "'")):
            w = complex(sign * om, -gam)
            v = _null_vectors(w, params, 1)[:, 0]
            modes.append(EigenMode(
                label=label + suffix, frequency=ComplexFrequency(w.real, w.imag, label + suffix),
                weight=dft_matrix(n) @ v, layer_weight=v, parity=par,
            ))
    return EigenModeSet(modes=tuple(modes), params=params, n_expected=2 * n)


# ------------------------------------------------------------- certified
def _fix_phase(v):
    """Rotate v so that its overlap with a fixed asymmetric real vector is real positive."""
    ref = np.arange(1, v.shape[0] + 1, dtype=float)
    s = ref @ v
    if abs(s) < 1e-12:
        s = v[np.argmax(np.abs(v))]
    return v * (abs(s) / s)


def _null_vectors(omega, params, k):
    s, _ = _s_and_ds(omega, params)
    _, _, vh = np.linalg.svd(s)
    vs = vh.conj().T[:, -k:][:, ::-1]
    return np.stack([_fix_phase(vs[:, j]) for j in range(k)], axis=1)


def singular_residual(omega, params):
    """|det S| over a local scale: product of per-column max(|S_j|, |w| |S'_j|)."""
    w = complex(omega)
    s, ds = _s_and_ds(w, params)
    scale = np.maximum(np.linalg.norm(s, axis=0), abs(w) * np.linalg.norm(ds, axis=0))
    return float(abs(np.linalg.det(s)) / np.prod(scale))


def newton_polish(func, z0, multiplicity=1, maxit=200):
    """Damped Newton on a holomorphic f with f'/f supplied; |f| decreases monotonically.

    Returns (root, trace of |f| values).
    """
    z = complex(z0)
    f, dl = func(z)
    fz, dlz = complex(f[0]), complex(dl[0])
    trace = [abs(fz)]
    for _ in range(maxit):
        if fz == 0 or not np.isfinite(dlz):
            break
        step = -multiplicity / dlz
        lam = 1.0
        moved = False
        while lam > 1e-12:
            zn = z + lam * step
            fn, dln = func(zn)
            if abs(fn[0]) < abs(fz):
                z, fz, dlz = zn, complex(fn[0]), complex(dln[0])
                trace.append(abs(fz))
                moved = True
                break
            lam *= 0.5
        if not moved or abs(lam * step) <= 4e-16 * abs(z):
            break
    return z, tuple(trace)


def _isolate(func, box, count, n0, moment=None, depth=0):
    """Split box until every piece holds one root (or an unresolvable cluster).

    ``moment`` is the contour estimate of the sum of enclosed roots; for a
    single root it is the Newton seed.
    """
    if count == 0:
        return []
    if depth > 200:
        raise CertificationError("bisection depth exceeded")
    pad = 1e-12 * max(1.0, abs(box.center))
    if count == 1:
        seeds = [box.center]
        if moment is not None and np.isfinite(moment):
            # the contour estimate can land just outside when the root hugs an edge
            inside = complex(min(max(moment.real, box.re_min), box.re_max),
                             min(max(moment.imag, box.im_min), box.im_max))
            seeds.insert(0, inside)
        for seed in seeds:
            z, trace = newton_polish(func, seed)
            if box.contains(z, pad=pad):
                return [(z, 1, box, trace)]
    elif box.diameter < CLUSTER_TOL:
        seed = moment / count if moment is not None else box.center
        z, trace = newton_polish(func, seed, multiplicity=count)
        return [(z, count, box, trace)]
    for frac in SPLIT_FRACTIONS:
        try:
            kids = box.split(frac)
            res = [winding_number(func, b, n0=n0, return_moment=True) for b in kids]
        except BoundaryZeroError:
            continue
        counts = [r[0] for r in res]
        if sum(counts) != count:
            raise CertificationError(f"child counts {counts} do not add up to {count} in {box}")
        out = []
        for b, (c, mom) in zip(kids, res):
            out.extend(_isolate(func, b, c, n0, mom, depth + 1))
        return out
    raise BoundaryZeroError(f"could not place a split line clear of zeros in {box}")


def _roots_in_box(params, box, n0):
    found = []
    for parity, q in _blocks(params):
        func = _block_function(params, q)
        total = None
        for shrink in (0.0, 1e-7, 3e-7):
            b = box if shrink == 0 else Box(box.re_min + shrink * box.width, box.re_max - shrink * box.width,
                                            box.im_min + shrink * box.height, box.im_max)
            try:
                total, mom = winding_number(func, b, n0=n0, return_moment=True)
                box_used = b
                break
            except BoundaryZeroError:
                continue
        if total is None:
            raise CertificationError(f"zero on the boundary of {box} persists after adjustment")
        for z, mult, bx, trace in _isolate(func, box_used, total, n0, mom):
            found.append(dict(omega=z, parity=parity, mult=mult, box=bx, trace=trace, block_count=total))
    return found


def _labels_for(params, roots):
    """Labels for positive-frequency roots (list of dicts) in place."""
    n = params.n_layers
    even = sorted([r for r in roots if r["parity"] > 0], key=lambda r: r["omega"].imag)
    odd = sorted([r for r in roots if r["parity"] < 0], key=lambda r: r["omega"].imag)
    if n == 1 and len(roots) == 1:
        roots[0]["label"] = "mono"
    elif n == 2 and len(even) == 1 and len(odd) == 1:
        even[0]["label"], odd[0]["label"] = "1", "2"
    elif n == 3 and len(even) == 2 and len(odd) == 1:
        even[0]["label"], even[1]["label"], odd[0]["label"] = "0", "1", "-1"
    else:
        for j, r in enumerate(sorted(roots, key=lambda r: r["omega"].imag)):
            r["label"] = f"m{j}"


def find_modes(params, search_box=None, n0=64):
    """Certified eigenfrequencies and weights inside search_box and its mirror image."""
    if params.g <= 0:
        raise InvalidParameterError("find_modes needs g > 0")
    box = search_box if search_box is not None else default_box(params)
    if box.contains_origin():
        raise InvalidParameterError("search box must exclude w = 0")
    n = params.n_layers
    u = dft_matrix(n)

    straddle = box.re_min < 0 < box.re_max
    if straddle:
        roots = _roots_in_box(params, box, n0)
        pos = [r for r in roots if r["omega"].real > 0]
        neg = [r for r in roots if r["omega"].real <= 0]
    else:
        first = _roots_in_box(params, box, n0)
        second = _roots_in_box(params, box.mirrored(), n0)
        pos, neg = (first, second) if box.re_min > 0 else (second, first)

    # merge near-coincident simple roots into one degenerate mode
    def merge(rs):
        out = []
        for r in sorted(rs, key=lambda r: (r["omega"].real, r["omega"].imag)):
            if out and abs(out[-1]["omega"] - r["omega"]) < CLUSTER_TOL:
                out[-1]["mult"] += r["mult"]
            else:
                out.append(dict(r))
        return out

    pos, neg = merge(pos), merge(neg)
    _labels_for(params, pos)

    # pairing: every root must have a partner at -conj(w)
    pairing_ok = len(pos) == len(neg)
    used = set()
    for r in pos:
        target = -r["omega"].conjugate()
        best = None
        for j, s in enumerate(neg):
            if j in used:
                continue
            dist = abs(s["omega"] - target)
            if best is None or dist < best[0]:
                best = (dist, j)
        if best is None or best[0] > 1e-9 * max(1.0, abs(target)) or neg[best[1]]["mult"] != r["mult"]:
            pairing_ok = False
            continue
        used.add(best[1])
        neg[best[1]]["label"] = r["label"] + "'"
    for j, s in enumerate(neg):
        s.setdefault("label", f"x{j}'")

    modes = []
    all_ok = True
    for r in pos + neg:
        z = r["omega"]
        v = _null_vectors(z, params, r["mult"])
        res = singular_residual(z, params)
        ok = z.imag < 0 and res <= RESIDUAL_TOL
        all_ok &= ok
        w = u @ v
        if r["mult"] == 1:
            v, w = v[:, 0], w[:, 0]
        modes.append(EigenMode(
            label=r["label"], frequency=ComplexFrequency(z.real, z.imag, r["label"]),
            weight=w, layer_weight=v, parity=r["parity"], multiplicity=r["mult"],
            box=r["box"], winding=r["mult"], residual=res, newton_trace=r["trace"], certified=ok,
        ))
    count = sum(m.multiplicity for m in modes)
    certified = all_ok and pairing_ok and count == 2 * n
    return EigenModeSet(modes=tuple(modes), params=params, n_expected=2 * n,
                        certified=certified, search_box=box, pairing_ok=pairing_ok)


def require_certified(mode_set):
    if not mode_set.certified:
        bad = [m.label for m in mode_set.modes if not m.certified]
        raise CertificationError(
            f"mode set not certified: found {mode_set.count} of {mode_set.n_expected} roots, "
            f"pairing_ok={mode_set.pairing_ok}, failing modes={bad}"
        )
    return mode_set


def superradiant(mode_set):
    pos = mode_set.positive()
    return max(pos, key=lambda m: m.gamma)


def mode_basis_matrix(mode_set):
    """P with rows = layer-basis weights of the positive-frequency modes; b = P B_l."""
    rows = []
    for m in mode_set.positive():
        v = m.layer_weight
        if v.ndim == 1:
            rows.append(v)
        else:
            rows.extend(v.T)
    p = np.array(rows)
    n = mode_set.params.n_layers
    if p.shape != (n, n):
        raise CertificationError(f"need {n} positive-frequency weights, have {p.shape[0]}")
    return p


def eigenmode_weights_to_layer_basis(mode_set):
    """{label: layer-basis weight} for the positive-frequency modes."""
    return {m.label: m.layer_weight for m in mode_set.positive()}


def reference_layer_vectors(n):
    """Leading-order layer patterns of the radiative modes, keyed by label."""
    if n == 1:
        return {"mono": np.array([1.0])}
    if n == 2:
        s = 1 / math.sqrt(2)
        return {"1": np.array([s, s]), "2": np.array([s, -s])}
    if n == 3:
        return {"0": np.ones(3) / math.sqrt(3),
                "1": np.array([-1.0, 2.0, -1.0]) / math.sqrt(6),
                "-1": np.array([1.0, 0.0, -1.0]) / math.sqrt(2)}
    raise UnsupportedError("reference patterns are tabulated for N <= 3")


def overlap(v, ref):
    v = np.asarray(v, dtype=complex)
    ref = np.asarray(ref, dtype=complex)
    return float(abs(np.vdot(ref, v)) / (np.linalg.norm(v) * np.linalg.norm(ref)))


# ------------------------------------------------------------- N=3 transform
@dataclass(frozen=True)
class TransformT:
    omega: complex
    matrix: np.ndarray
    m: complex
    a: complex
    b: complex
    c: complex
    e: complex


def transform_t(omega, params, tol=1e-14):
    """Approximate diagonaliser of D for N = 3 (rows (1,0,-1) ordering)."""
    if params.n_layers != 3:
        raise UnsupportedError("transform_t is defined for N = 3 only")
    omega = complex(omega)
    d = d_matrix_exact(omega, params.delta0)
    a_, b_, c_, e_ = d[0, 0], d[1, 1], d[0, 1], d[0, 2]
    den = b_ - a_ - e_
    if abs(den) < tol:
        raise DegenerateTransformError(f"|B - A - E| = {abs(den):.3e} below tolerance")
    t = c_ / den
    mm = 1 / np.sqrt(1 + 2 * t * t)
    s2 = math.sqrt(2)
    mat = np.array([
        [mm / s2, -s2 * t * mm, mm / s2],
        [t * mm, mm, t * mm],
        [1 / s2, 0, -1 / s2],
    ], dtype=complex)
    return TransformT(omega=omega, matrix=mat, m=mm, a=a_, b=b_, c=c_, e=e_)


def transform_residual(tt, params):
    """Max off-diagonal magnitude of T D T^T."""
    d = d_matrix_exact(tt.omega, params.delta0)
    x = tt.matrix @ d @ tt.matrix.T
    return float(np.max(np.abs(x - np.diag(np.diag(x)))))
