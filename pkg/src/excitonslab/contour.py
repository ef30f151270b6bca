"""Zero counting for holomorphic functions on rectangles (argument principle).

The function is supplied as ``func(z_array) -> (values, logderiv)`` where
logderiv = f'/f.  Phase increments along each edge are accumulated on an
adaptively refined sample set: a segment is split while its phase jump
exceeds pi/4 or it is longer than half the local distance-to-zero
estimate |f/f'|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryZeroError, CertificationError

MAX_SAMPLES = 200_000


@dataclass(frozen=True)
class Box:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError(f"degenerate box {self}")

    @property
    def center(self):
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def width(self):
        return self.re_max - self.re_min

    @property
    def height(self):
        return self.im_max - self.im_min

    @property
    def diameter(self):
        return float(np.hypot(self.width, self.height))

    def corners(self):
        # counter-clockwise
        return (
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        )

    def contains(self, z, pad=0.0):
        z = complex(z)
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def contains_origin(self):
        return self.re_min <= 0 <= self.re_max and self.im_min <= 0 <= self.im_max

    def split(self, frac=0.5):
        """Two halves across the longer side."""
        if self.width >= self.height:
            x = self.re_min + frac * self.width
            return (Box(self.re_min, x, self.im_min, self.im_max),
                    Box(x, self.re_max, self.im_min, self.im_max))
        y = self.im_min + frac * self.height
        return (Box(self.re_min, self.re_max, self.im_min, y),
                Box(self.re_min, self.re_max, y, self.im_max))

    def quarters(self, fx=0.5, fy=0.5):
        x = self.re_min + fx * self.width
        y = self.im_min + fy * self.height
        return (
            Box(self.re_min, x, self.im_min, y), Box(x, self.re_max, self.im_min, y),
            Box(self.re_min, x, y, self.im_max), Box(x, self.re_max, y, self.im_max),
        )

    def mirrored(self):
        """Image under w -> -conj(w)."""
        return Box(-self.re_max, -self.re_min, self.im_min, self.im_max)

    def as_list(self):
        return [self.re_min, self.re_max, self.im_min, self.im_max]


def edge_phase(func, z0, z1, n0=64, min_step=None, moment=False, origin=0j):
    """Continuous change of arg f along the segment z0 -> z1.

    With moment=True also returns the trapezoid value of
    int (z - origin) f'/f dz along the edge (used to seed Newton inside
    one-zero boxes).
    """
    length = abs(z1 - z0)
    if min_step is None:
        min_step = 1e-13 * max(1.0, abs(z0), abs(z1))
    s = np.linspace(0.0, 1.0, n0 + 1)
    f, dl = func(z0 + s * (z1 - z0))
    while True:
        if np.any(f == 0) or not np.all(np.isfinite(f)):
            raise BoundaryZeroError(f"zero or non-finite value on edge {z0}->{z1}")
        r = 1.0 / np.maximum(np.abs(dl), 1e-300)
        dphi = np.angle(f[1:] / f[:-1])
        ds = np.diff(s) * length
        bad = (np.abs(dphi) > np.pi / 4) | (ds > 0.5 * np.minimum(r[1:], r[:-1]))
        if not bad.any():
            if not moment:
                return float(dphi.sum())
            z = z0 + s * (z1 - z0)
            y = (z - origin) * dl
            mom = complex(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(z)))
            return float(dphi.sum()), mom
        if np.any(ds[bad] < min_step):
            raise BoundaryZeroError(f"zero within {min_step:.1e} of edge {z0}->{z1}")
        if s.size > MAX_SAMPLES:
            raise CertificationError("edge refinement did not converge")
        # insert enough points per bad segment to satisfy both criteria in one pass
        rmin = np.minimum(r[1:], r[:-1])[bad]
        pieces = np.maximum(np.ceil(ds[bad] / (0.25 * rmin)), np.ceil(np.abs(dphi[bad]) / (np.pi / 8)))
        pieces = np.clip(np.nan_to_num(pieces, nan=2.0, posinf=64.0), 2, 64).astype(int)
        lo, hi = s[:-1][bad], s[1:][bad]
        mids = np.concatenate([lo[i] + (hi[i] - lo[i]) * np.arange(1, k) / k
                               for i, k in enumerate(pieces)])
        fm, dlm = func(z0 + mids * (z1 - z0))
        s = np.concatenate([s, mids])
        f = np.concatenate([f, fm])
        dl = np.concatenate([dl, dlm])
        order = np.argsort(s, kind="stable")
        s, f, dl = s[order], f[order], dl[order]


def winding_number(func, box, n0=64, return_moment=False):
    """Number of zeros of func inside box, checked at two initial resolutions.

    Raises CertificationError if the counts disagree or the accumulated
    phase is not close to a multiple of 2 pi.  With return_moment=True the
    estimate of the sum of the enclosed zeros is returned as well.
    """
    counts = []
    mom = 0j
    c = box.corners()
    for n in (n0, 2 * n0):
        total = 0.0
        mom = 0j
        for i in range(4):
            ph, m = edge_phase(func, c[i], c[(i + 1) % 4], n0=n, moment=True, origin=box.center)
            total += ph
            mom += m
        w = total / (2 * np.pi)
        k = int(round(w))
        if abs(w - k) > 1e-3:
            raise CertificationError(f"non-integer winding {w:.6f} on {box}")
        counts.append(k)
    if counts[0] != counts[1]:
        raise CertificationError(f"winding unstable under refinement: {counts} on {box}")
    if counts[0] < 0:
        raise CertificationError(f"negative winding {counts[0]}: function has poles in {box}")
    if return_moment:
        return counts[0], mom / (2j * np.pi) + counts[0] * box.center
    return counts[0]
