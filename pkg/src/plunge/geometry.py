"""Continuous and lattice domains.

Continuous domains are compact subsets of R^d described by a membership
predicate, a bounding box and, for catalog shapes, exact volume, boundary
measure and Fourier transform of the indicator.  Lattice sets are stored as
integer vectors k representing the points k/L.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as _gamma
from scipy.special import jv
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

__all__ = [
    "ExactTransformUnavailable",
    "ContinuousDomain", "Box", "Ball", "Annulus", "BoxMinusBall",
    "Rectilinear", "Union", "Dilation", "Shift", "Predicate",
    "box", "ball", "annulus", "box_minus_ball", "lshape", "union", "dilate", "shift",
    "GridSet", "RegularityReport", "BoundarySample", "DyadicCover",
    "discretize", "discrete_boundary", "discrete_ahlfors", "boundary_measure",
    "sample_boundary", "polyline_sample", "continuous_ahlfors_estimate",
    "dyadic_approximations", "lattice_count_check",
]


class ExactTransformUnavailable(ValueError):
    """Raised when a closed-form indicator transform is requested but unknown."""


def _interval_ft(a, b, xi):
    # integral of exp(-2 pi i x xi) over [a, b]
    w = b - a
    c = 0.5 * (a + b)
    val = w * np.sinc(w * xi)
    if np.all(c == 0):
        return val.astype(complex)
    return val * np.exp(-2j * np.pi * c * xi)


def _ball_volume(r, d):
    return math.pi ** (d / 2) * r ** d / math.gamma(d / 2 + 1)


def _ball_ft(r, d, rho):
    """Transform of the centered ball: r^d (2 pi)^nu J_nu(z)/z^nu, z = 2 pi r rho."""
    nu = d / 2
    z = 2 * np.pi * r * np.asarray(rho, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-4
    zs = z[small]
    # two-term series of J_nu(z)/z^nu
    out[small] = (1 - zs ** 2 / (4 * (nu + 1))) / (2 ** nu * _gamma(nu + 1))
    zl = z[~small]
    out[~small] = jv(nu, zl) / zl ** nu
    return r ** d * (2 * np.pi) ** nu * out


class ContinuousDomain:
    """Compact domain with a closed membership predicate.

    Subclasses fill in ``dim``, ``kind``, ``lo``/``hi`` (bounding box) and
    optionally ``volume`` and ``boundary``.  ``exact`` tells whether
    :meth:`ft` is a closed form.
    """

    kind = "predicate"
    exact = False
    volume: float | None = None
    boundary: float | None = None

    def __init__(self, dim, lo, hi):
        self.dim = int(dim)
        self.lo = np.asarray(lo, dtype=float).reshape(self.dim)
        self.hi = np.asarray(hi, dtype=float).reshape(self.dim)

    # membership -------------------------------------------------------
    def contains(self, x):
        raise NotImplementedError

    def __contains__(self, x):
        return bool(self.contains(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    # exact box tests, used by the dyadic decomposition -----------------
    def contains_box(self, lo, hi):
        """Whether each closed box [lo, hi] lies inside the domain (sampled fallback)."""
        return _sampled_box_test(self, lo, hi, all)

    def meets_box(self, lo, hi):
        """Whether the open box (lo, hi) meets the domain in positive measure (sampled fallback)."""
        return _sampled_box_test(self, lo, hi, any)

    # transforms ---------------------------------------------------------
    def ft(self, xi):
        """Closed-form transform of the indicator at points xi of shape (n, d)."""
        raise ExactTransformUnavailable(f"no closed-form transform for kind {self.kind!r}")

    def ft_grid(self, axes):
        """Transform on the tensor grid spanned by the 1-D arrays ``axes``."""
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return self.ft(pts).reshape(mesh[0].shape)

    def as_boxes(self):
        """List of closed boxes (lo, hi) whose union is the domain, or None."""
        return None

    def __repr__(self):
        return f"<{type(self).__name__} kind={self.kind} d={self.dim}>"


def _sampled_box_test(dom, lo, hi, reduce, per_axis=5):
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    t = np.linspace(0.0, 1.0, per_axis)
    offs = np.array(list(itertools.product(t, repeat=dom.dim)))
    out = np.empty(len(lo), dtype=bool)
    for i in range(len(lo)):
        pts = lo[i] + offs * (hi[i] - lo[i])
        out[i] = reduce(dom.contains(pts))
    return out


class Box(ContinuousDomain):
    kind = "box"
    exact = True

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs lo < hi on every axis")
        super().__init__(len(lo), lo, hi)
        w = hi - lo
        self.volume = float(np.prod(w))
        if self.dim == 1:
            self.boundary = 2.0
        else:
            self.boundary = float(2 * sum(np.prod(np.delete(w, i)) for i in range(self.dim)))

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def contains_box(self, lo, hi):
        return np.all((np.atleast_2d(lo) >= self.lo) & (np.atleast_2d(hi) <= self.hi), axis=1)

    def meets_box(self, lo, hi):
        return np.all((np.atleast_2d(lo) < self.hi) & (np.atleast_2d(hi) > self.lo), axis=1)

    def ft(self, xi):
        xi = np.atleast_2d(xi)
        out = np.ones(len(xi), dtype=complex)
        for i in range(self.dim):
            out *= _interval_ft(self.lo[i], self.hi[i], xi[:, i])
        return out

    def ft_grid(self, axes):
        out = np.ones((), dtype=complex)
        for i, ax in enumerate(axes):
            out = np.multiply.outer(out, _interval_ft(self.lo[i], self.hi[i], np.asarray(ax, float)))
        return out

    def as_boxes(self):
        return [(self.lo.copy(), self.hi.copy())]


def _dist_range(lo, hi, c):
    """Nearest and farthest Euclidean distance from c to points of boxes [lo, hi]."""
    lo = np.atleast_2d(lo) - c
    hi = np.atleast_2d(hi) - c
    near = np.sqrt(np.sum(np.clip(0.0, lo, hi) ** 2, axis=1))
    far = np.sqrt(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2, axis=1))
    return near, far


class Ball(ContinuousDomain):
    kind = "ball"
    exact = True

    def __init__(self, r, dim=2, center=None):
        if r <= 0:
            raise ValueError("ball radius must be positive")
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        super().__init__(dim, c - r, c + r)
        self.r = float(r)
        self.center = c
        self.volume = _ball_volume(self.r, dim)
        self.boundary = 2.0 if dim == 1 else dim * self.volume / self.r

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.sum((x - self.center) ** 2, axis=1) <= self.r ** 2

    def contains_box(self, lo, hi):
        return _dist_range(lo, hi, self.center)[1] <= self.r

    def meets_box(self, lo, hi):
        return _dist_range(lo, hi, self.center)[0] < self.r

    def ft(self, xi):
        xi = np.atleast_2d(xi)
        val = _ball_ft(self.r, self.dim, np.sqrt(np.sum(xi ** 2, axis=1))).astype(complex)
        if np.any(self.center != 0):
            val *= np.exp(-2j * np.pi * xi @ self.center)
        return val

    def ft_grid(self, axes):
        mesh = np.meshgrid(*[np.asarray(a, float) for a in axes], indexing="ij")
        rho = np.sqrt(sum(m ** 2 for m in mesh))
        val = _ball_ft(self.r, self.dim, rho).astype(complex)
        if np.any(self.center != 0):
            val *= np.exp(-2j * np.pi * sum(m * c for m, c in zip(mesh, self.center)))
        return val


class Annulus(ContinuousDomain):
    """Closed shell r0 <= |x| <= r1."""

    kind = "annulus"
    exact = True

    def __init__(self, r0, r1, dim=2):
        if not 0 < r0 < r1:
            raise ValueError(f"annulus needs 0 < r0 < r1, got r0={r0}, r1={r1}")
        super().__init__(dim, -r1 * np.ones(dim), r1 * np.ones(dim))
        self.r0, self.r1 = float(r0), float(r1)
        self.volume = _ball_volume(r1, dim) - _ball_volume(r0, dim)
        self.boundary = dim * (_ball_volume(r1, dim) / r1 + _ball_volume(r0, dim) / r0)

    def contains(self, x):
        s = np.sum(np.atleast_2d(x) ** 2, axis=1)
        return (s >= self.r0 ** 2) & (s <= self.r1 ** 2)

    def contains_box(self, lo, hi):
        near, far = _dist_range(lo, hi, 0.0)
        return (far <= self.r1) & (near >= self.r0)

    def meets_box(self, lo, hi):
        near, far = _dist_range(lo, hi, 0.0)
        return (near < self.r1) & (far > self.r0)

    def ft(self, xi):
        rho = np.sqrt(np.sum(np.atleast_2d(xi) ** 2, axis=1))
        return (_ball_ft(self.r1, self.dim, rho) - _ball_ft(self.r0, self.dim, rho)).astype(complex)

    def ft_grid(self, axes):
        mesh = np.meshgrid(*[np.asarray(a, float) for a in axes], indexing="ij")
        rho = np.sqrt(sum(m ** 2 for m in mesh))
        return (_ball_ft(self.r1, self.dim, rho) - _ball_ft(self.r0, self.dim, rho)).astype(complex)


class BoxMinusBall(ContinuousDomain):
    """Closure of the centered cube of side w with the open ball of radius r removed."""

    kind = "box-minus-ball"
    exact = True

    def __init__(self, w, r, dim=2):
        if not 0 < 2 * r < w:
            raise ValueError("box-minus-ball needs 0 < 2r < w")
        super().__init__(dim, -w / 2 * np.ones(dim), w / 2 * np.ones(dim))
        self.w, self.r = float(w), float(r)
        self._box = Box(self.lo, self.hi)
        self._ball = Ball(r, dim)
        self.volume = self._box.volume - self._ball.volume
        self.boundary = self._box.boundary + self._ball.boundary

    def contains(self, x):
        x = np.atleast_2d(x)
        return self._box.contains(x) & (np.sum(x ** 2, axis=1) >= self.r ** 2)

    def contains_box(self, lo, hi):
        return self._box.contains_box(lo, hi) & (_dist_range(lo, hi, 0.0)[0] >= self.r)

    def meets_box(self, lo, hi):
        lo = np.maximum(np.atleast_2d(lo), self.lo)
        hi = np.minimum(np.atleast_2d(hi), self.hi)
        ok = np.all(lo < hi, axis=1)
        return ok & (_dist_range(lo, hi, 0.0)[1] > self.r)

    def ft(self, xi):
        return self._box.ft(xi) - self._ball.ft(xi)

    def ft_grid(self, axes):
        return self._box.ft_grid(axes) - self._ball.ft_grid(axes)


class Rectilinear(ContinuousDomain):
    """Finite union of closed axis-parallel boxes (overlaps allowed).

    Volume, boundary measure and transform are exact: the boxes are
    resolved on the compressed grid spanned by all their faces.
    """

    exact = True

    def __init__(self, boxes, kind="finite-union"):
        boxes = [(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))) for a, b in boxes]
        if not boxes:
            raise ValueError("rectilinear domain needs at least one box")
        dim = len(boxes[0][0])
        los = np.array([b[0] for b in boxes])
        his = np.array([b[1] for b in boxes])
        if np.any(his <= los):
            raise ValueError("degenerate box in union")
        super().__init__(dim, los.min(axis=0), his.max(axis=0))
        self.kind = kind
        self.boxes_lo, self.boxes_hi = los, his
        self.coords = [np.unique(np.concatenate([los[:, i], his[:, i]])) for i in range(dim)]
        mask = np.zeros([len(c) - 1 for c in self.coords], dtype=bool)
        for a, b in zip(los, his):
            sl = tuple(slice(np.searchsorted(c, a[i]), np.searchsorted(c, b[i])) for i, c in enumerate(self.coords))
            mask[sl] = True
        self.mask = mask
        widths = [np.diff(c) for c in self.coords]
        cellvol = np.ones(())
        for w in widths:
            cellvol = np.multiply.outer(cellvol, w)
        self.volume = float(np.sum(cellvol * mask))
        total = 0.0
        for i in range(dim):
            pad = [(0, 0)] * dim
            pad[i] = (1, 1)
            flips = np.diff(np.pad(mask, pad).astype(np.int8), axis=i) != 0
            area = np.ones(())
            for j, w in enumerate(widths):
                area = np.multiply.outer(area, np.ones(1) if j == i else w)
            total += float(np.sum(flips * area))
        self.boundary = total if dim > 1 else float(np.sum(np.diff(np.pad(mask, 1).astype(np.int8)) != 0))

    def contains(self, x):
        x = np.atleast_2d(x)
        out = np.zeros(len(x), dtype=bool)
        for a, b in zip(self.boxes_lo, self.boxes_hi):
            out |= np.all((x >= a) & (x <= b), axis=1)
        return out

    def contains_box(self, lo, hi):
        lo, hi = np.atleast_2d(lo), np.atleast_2d(hi)
        out = np.empty(len(lo), dtype=bool)
        for n in range(len(lo)):
            if np.any(lo[n] < self.lo) or np.any(hi[n] > self.hi):
                out[n] = False
                continue
            sl = []
            for i, c in enumerate(self.coords):
                # cells (c[m], c[m+1]) overlapping (lo, hi) in positive length
                i0 = np.searchsorted(c, lo[n, i], side="right") - 1
                i1 = np.searchsorted(c, hi[n, i], side="left")
                sl.append(slice(max(i0, 0), i1))
            out[n] = bool(np.all(self.mask[tuple(sl)]))
        return out

    def meets_box(self, lo, hi):
        lo, hi = np.atleast_2d(lo), np.atleast_2d(hi)
        out = np.zeros(len(lo), dtype=bool)
        for a, b in zip(self.boxes_lo, self.boxes_hi):
            out |= np.all((lo < b) & (hi > a), axis=1)
        return out

    def _axis_matrices(self, axes):
        return [_interval_ft(c[:-1, None], c[1:, None], np.asarray(ax, float)[None, :])
                for c, ax in zip(self.coords, axes)]

    def ft(self, xi):
        xi = np.atleast_2d(xi)
        mats = self._axis_matrices([xi[:, i] for i in range(self.dim)])
        acc = np.tensordot(mats[0], self.mask.astype(float), axes=([0], [0]))
        for A in mats[1:]:
            acc = np.einsum("pi...,ip->p...", acc, A)
        return acc

    def ft_grid(self, axes):
        mats = self._axis_matrices(axes)
        acc = self.mask.astype(complex)
        for A in mats:
            # contract the leading cell axis, append the frequency axis at the end
            acc = np.tensordot(acc, A, axes=([0], [0]))
        return acc

    def as_boxes(self):
        return list(zip(self.boxes_lo.copy(), self.boxes_hi.copy()))


class Union(ContinuousDomain):
    """Union of arbitrary domains.

    Volume and boundary measure are additive only when the bounding boxes of
    the parts are pairwise separated; the transform is additive when they do
    not overlap in positive measure.
    """

    kind = "finite-union"

    def __init__(self, parts):
        parts = list(parts)
        dim = parts[0].dim
        super().__init__(dim, np.min([p.lo for p in parts], axis=0), np.max([p.hi for p in parts], axis=0))
        self.parts = parts
        overlap = separated = False
        for p, q in itertools.combinations(parts, 2):
            gap = np.maximum(p.lo - q.hi, q.lo - p.hi)
            if np.all(gap < 0):
                overlap = True
            if np.max(gap) <= 0:
                separated = True
        self.disjoint = not overlap
        self.exact = self.disjoint and all(p.exact for p in parts)
        if self.disjoint and all(p.volume is not None for p in parts):
            self.volume = float(sum(p.volume for p in parts))
        if not separated and all(p.boundary is not None for p in parts):
            self.boundary = float(sum(p.boundary for p in parts))

    def contains(self, x):
        x = np.atleast_2d(x)
        out = np.zeros(len(x), dtype=bool)
        for p in self.parts:
            out |= p.contains(x)
        return out

    def contains_box(self, lo, hi):
        # conservative: the box must sit inside a single part
        out = np.zeros(len(np.atleast_2d(lo)), dtype=bool)
        for p in self.parts:
            out |= p.contains_box(lo, hi)
        return out

    def meets_box(self, lo, hi):
        out = np.zeros(len(np.atleast_2d(lo)), dtype=bool)
        for p in self.parts:
            out |= p.meets_box(lo, hi)
        return out

    def ft(self, xi):
        if not self.exact:
            raise ExactTransformUnavailable("union parts overlap or lack closed forms")
        return sum(p.ft(xi) for p in self.parts)

    def ft_grid(self, axes):
        if not self.exact:
            raise ExactTransformUnavailable("union parts overlap or lack closed forms")
        return sum(p.ft_grid(axes) for p in self.parts)


class Dilation(ContinuousDomain):
    """The set t * base."""

    kind = "dilation"

    def __init__(self, base, t):
        if t <= 0:
            raise ValueError("dilation factor must be positive")
        super().__init__(base.dim, base.lo * t, base.hi * t)
        self.base, self.t = base, float(t)
        self.exact = base.exact
        d = base.dim
        self.volume = None if base.volume is None else base.volume * self.t ** d
        self.boundary = None if base.boundary is None else base.boundary * self.t ** (d - 1)

    def contains(self, x):
        return self.base.contains(np.atleast_2d(x) / self.t)

    def contains_box(self, lo, hi):
        return self.base.contains_box(np.atleast_2d(lo) / self.t, np.atleast_2d(hi) / self.t)

    def meets_box(self, lo, hi):
        return self.base.meets_box(np.atleast_2d(lo) / self.t, np.atleast_2d(hi) / self.t)

    def ft(self, xi):
        return self.t ** self.dim * self.base.ft(self.t * np.atleast_2d(xi))

    def ft_grid(self, axes):
        return self.t ** self.dim * self.base.ft_grid([self.t * np.asarray(a, float) for a in axes])

    def as_boxes(self):
        b = self.base.as_boxes()
        return None if b is None else [(lo * self.t, hi * self.t) for lo, hi in b]


class Shift(ContinuousDomain):
    """The set base + v."""

    kind = "shift"

    def __init__(self, base, v):
        v = np.asarray(v, dtype=float).reshape(base.dim)
        super().__init__(base.dim, base.lo + v, base.hi + v)
        self.base, self.v = base, v
        self.exact = base.exact
        self.volume, self.boundary = base.volume, base.boundary

    def contains(self, x):
        return self.base.contains(np.atleast_2d(x) - self.v)

    def contains_box(self, lo, hi):
        return self.base.contains_box(np.atleast_2d(lo) - self.v, np.atleast_2d(hi) - self.v)

    def meets_box(self, lo, hi):
        return self.base.meets_box(np.atleast_2d(lo) - self.v, np.atleast_2d(hi) - self.v)

    def ft(self, xi):
        xi = np.atleast_2d(xi)
        return np.exp(-2j * np.pi * xi @ self.v) * self.base.ft(xi)

    def ft_grid(self, axes):
        axes = [np.asarray(a, float) for a in axes]
        phase = np.ones((), dtype=complex)
        for a, vi in zip(axes, self.v):
            phase = np.multiply.outer(phase, np.exp(-2j * np.pi * vi * a))
        return phase * self.base.ft_grid(axes)

    def as_boxes(self):
        b = self.base.as_boxes()
        return None if b is None else [(lo + self.v, hi + self.v) for lo, hi in b]


class Predicate(ContinuousDomain):
    """Generic domain given only by a vectorized predicate and a bounding box."""

    kind = "predicate"

    def __init__(self, fn, lo, hi, volume=None, boundary=None):
        lo = np.atleast_1d(np.asarray(lo, float))
        super().__init__(len(lo), lo, hi)
        self._fn = fn
        self.volume, self.boundary = volume, boundary

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        inside_box = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return inside_box & np.asarray(self._fn(x), dtype=bool)


# constructors ---------------------------------------------------------------

def box(*widths):
    w = np.asarray(widths, dtype=float)
    return Box(-w / 2, w / 2)


def ball(r, dim=2):
    return Ball(r, dim)


def annulus(r0, r1, dim=2):
    return Annulus(r0, r1, dim)


def box_minus_ball(w, r, dim=2):
    return BoxMinusBall(w, r, dim)


def lshape(w, notch):
    """Centered square of side w with a notch x notch square cut from the upper right corner."""
    if not 0 < notch < w:
        raise ValueError("lshape needs 0 < notch < w")
    h = w / 2
    return Rectilinear([((-h, -h), (h, h - notch)), ((-h, h - notch), (h - notch, h))], kind="l-shape")


def union(*parts):
    boxes = [p.as_boxes() for p in parts]
    if all(b is not None for b in boxes):
        return Rectilinear([bx for b in boxes for bx in b])
    return Union(parts)


def dilate(dom, t):
    return Dilation(dom, t)


def shift(dom, v):
    return Shift(dom, v)


# lattice sets ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSet:
    """Finite subset of the scaled lattice L^-1 Z^d, stored as sorted integer vectors."""

    dim: int
    L: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, self.dim)
        if len(pts):
            pts = np.unique(pts, axis=0)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def scaled(self):
        return self.points / self.L

    def as_set(self):
        return set(map(tuple, self.points.tolist()))

    def translate(self, v):
        return GridSet(self.dim, self.L, self.points + np.asarray(v, dtype=np.int64))

    @classmethod
    def block(cls, shape, L=1.0, origin=None):
        """All integer points of the box origin + prod [0, n_i)."""
        origin = np.zeros(len(shape), dtype=np.int64) if origin is None else np.asarray(origin)
        pts = np.stack(np.meshgrid(*[np.arange(n) for n in shape], indexing="ij"), -1).reshape(-1, len(shape))
        return cls(len(shape), L, pts + origin)


def discretize(domain: ContinuousDomain, L: float) -> GridSet:
    """Lattice points k with k/L in the domain."""
    if L <= 0:
        raise ValueError("resolution must be positive")
    if not (np.all(np.isfinite(domain.lo)) and np.all(np.isfinite(domain.hi))):
        raise ValueError("bounding box must be finite")
    lo = np.ceil(domain.lo * L - 1e-9).astype(np.int64)
    hi = np.floor(domain.hi * L + 1e-9).astype(np.int64)
    if np.any(hi < lo):
        return GridSet(domain.dim, L, np.zeros((0, domain.dim), dtype=np.int64))
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, domain.dim)
    keep = np.zeros(len(pts), dtype=bool)
    step = 1 << 20
    for s in range(0, len(pts), step):
        keep[s:s + step] = domain.contains(pts[s:s + step] / L)
    return GridSet(domain.dim, L, pts[keep])


def _encode(points, lo, shape):
    return np.ravel_multi_index(tuple((points - lo).T), shape)


def discrete_boundary(s: GridSet) -> GridSet:
    """Points of s with an axis neighbour outside s (distance exactly 1 to the complement)."""
    if len(s) == 0:
        raise ValueError("empty lattice set has no boundary")
    pts = s.points
    lo = pts.min(axis=0) - 1
    shape = tuple(pts.max(axis=0) + 2 - lo)
    codes = np.sort(_encode(pts, lo, shape))
    edge = np.zeros(len(pts), dtype=bool)
    for i in range(s.dim):
        for sgn in (-1, 1):
            nb = pts.copy()
            nb[:, i] += sgn
            c = _encode(nb, lo, shape)
            pos = np.clip(np.searchsorted(codes, c), 0, len(codes) - 1)
            edge |= codes[pos] != c
    return GridSet(s.dim, s.L, pts[edge])


@dataclass
class RegularityReport:
    eta: float
    kappa: float
    points: np.ndarray
    worst: np.ndarray
    mode: str
    resolution: float | None = None
    argmin: tuple = ()
    scales: np.ndarray | None = None

    @property
    def per_point(self):
        return {tuple(p): float(w) for p, w in zip(np.asarray(self.points).tolist(), self.worst)}


def discrete_ahlfors(boundary: GridSet) -> RegularityReport:
    """Exhaustive discrete regularity constant over half-open windows k + [-n/2, n/2)^d."""
    d = boundary.dim
    if d < 2:
        raise ValueError("discrete Ahlfors regularity needs d >= 2")
    if len(boundary) == 0:
        raise ValueError("empty boundary")
    pts = boundary.points
    N = len(pts)
    nmax = int(math.ceil(N ** (1.0 / (d - 1)) - 1e-12))
    pad = nmax // 2 + 1
    lo = pts.min(axis=0) - pad
    shape = tuple(pts.max(axis=0) + pad + 1 - lo)
    grid = np.zeros(shape, dtype=np.int64)
    grid[tuple((pts - lo).T)] = 1
    sat = grid
    for i in range(d):
        sat = np.cumsum(sat, axis=i)
    sat = np.pad(sat, [(1, 0)] * d)
    rel = pts - lo
    ratios = np.empty((N, nmax))
    corners = list(itertools.product((0, 1), repeat=d))
    for n in range(1, nmax + 1):
        a = rel - n // 2           # first index inside the window
        b = rel + (n + 1) // 2     # one past the last index
        a = np.clip(a, 0, None)
        b = np.minimum(b, np.array(shape))
        cnt = np.zeros(N, dtype=np.int64)
        for c in corners:
            idx = tuple(np.where(np.array(c)[:, None] == 1, b.T, a.T))
            cnt += (-1) ** (d - sum(c)) * sat[idx]
        ratios[:, n - 1] = cnt / n ** (d - 1)
    worst = ratios.min(axis=1)
    kappa = float(worst.min())
    # lexicographically smallest (k, n): points are sorted, then smallest n
    i = int(np.flatnonzero(worst == kappa)[0])
    n_star = int(np.flatnonzero(ratios[i] == kappa)[0]) + 1
    return RegularityReport(eta=float(N) ** (1.0 / (d - 1)), kappa=kappa, points=pts, worst=worst,
                            mode="discrete-exact", argmin=(tuple(int(v) for v in pts[i]), n_star))


# continuous boundary estimates ------------------------------------------------

@dataclass
class BoundarySample:
    """Weighted point sample of a boundary measure."""

    points: np.ndarray
    weights: np.ndarray
    resolution: float

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def total(self):
        return float(np.sum(self.weights))


def _check_resolution(domain, resolution):
    diam = float(np.linalg.norm(domain.hi - domain.lo))
    if resolution <= 0 or resolution > diam / 8:
        raise ValueError(f"resolution {resolution} coarser than 1/8 of the bounding-box diameter {diam:.4g}")


def sample_boundary(domain: ContinuousDomain, resolution: float, sigma: float = 1.5) -> BoundarySample:
    """Boundary faces of the rasterized domain, weighted by face area / |n|_1.

    A staircase approximation of a hypersurface with unit normal n has face
    area |n|_1 times the true area; the normal is estimated from the gradient
    of the Gaussian-smoothed indicator (sigma in cells).
    """
    _check_resolution(domain, resolution)
    h = float(resolution)
    d = domain.dim
    lo = domain.lo - 2 * h
    n = np.ceil((domain.hi + 2 * h - lo) / h).astype(int)
    axes = [lo[i] + h * (np.arange(n[i]) + 0.5) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    mask = domain.contains(centers).reshape(tuple(n))
    smooth = gaussian_filter(mask.astype(float), sigma)
    grad = np.gradient(smooth)
    if d == 1:
        grad = [grad]
    pts, wts = [], []
    for i in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[i], b[i] = slice(None, -1), slice(1, None)
        flip = mask[tuple(a)] != mask[tuple(b)]
        idx = np.nonzero(flip)
        g = np.stack([0.5 * (gr[tuple(a)][idx] + gr[tuple(b)][idx]) for gr in grad], axis=1)
        norm = np.linalg.norm(g, axis=1)
        l1 = np.where(norm > 0, np.sum(np.abs(g), axis=1) / np.where(norm > 0, norm, 1), 1.0)
        p = np.stack([axes[j][idx[j]] for j in range(d)], axis=1)
        p[:, i] += h / 2
        pts.append(p)
        wts.append(h ** (d - 1) / l1)
    return BoundarySample(np.concatenate(pts), np.concatenate(wts), h)


def polyline_sample(vertices, resolution: float, closed: bool = False) -> BoundarySample:
    """Midpoint sample of a polygonal curve with arc-length weights."""
    v = np.asarray(vertices, dtype=float)
    if closed:
        v = np.vstack([v, v[:1]])
    pts, wts = [], []
    for a, b in zip(v[:-1], v[1:]):
        length = float(np.linalg.norm(b - a))
        m = max(1, int(math.ceil(length / resolution)))
        t = (np.arange(m) + 0.5) / m
        pts.append(a + t[:, None] * (b - a))
        wts.append(np.full(m, length / m))
    return BoundarySample(np.concatenate(pts), np.concatenate(wts), float(resolution))


def boundary_measure(domain: ContinuousDomain, resolution: float | None = None, rasterize: bool = False) -> float:
    """Boundary measure: closed form for catalog shapes, rasterized estimate otherwise."""
    if domain.boundary is not None and not rasterize:
        return float(domain.boundary)
    if resolution is None:
        resolution = float(np.linalg.norm(domain.hi - domain.lo)) / 400
    return sample_boundary(domain, resolution).total


def continuous_ahlfors_estimate(domain, resolution: float, scale: float | None = None,
                                n_radii: int = 16, max_centers: int = 4000) -> RegularityReport:
    """Approximate regularity constant over a log ladder of ball radii up to the scale.

    ``domain`` is a ContinuousDomain (boundary rasterized at ``resolution``)
    or a prebuilt BoundarySample.
    """
    if isinstance(domain, BoundarySample):
        sample = domain
    else:
        sample = sample_boundary(domain, resolution)
    if len(sample.points) == 0:
        raise ValueError("empty boundary sample")
    d = sample.dim
    if d < 2:
        raise ValueError("continuous regularity needs d >= 2")
    total = sample.total
    eta = float(scale) if scale is not None else total ** (1.0 / (d - 1))
    r_min = min(eta, 8 * sample.resolution)
    radii = np.geomspace(r_min, eta, n_radii)
    step = max(1, len(sample.points) // max_centers)
    centers = sample.points[::step]
    tree = cKDTree(sample.points)
    ratios = np.empty((len(centers), n_radii))
    for j, r in enumerate(radii):
        hits = tree.query_ball_point(centers, r)
        mass = np.array([sample.weights[h].sum() for h in hits])
        ratios[:, j] = mass / r ** (d - 1)
    worst = ratios.min(axis=1)
    i = int(np.argmin(worst))
    return RegularityReport(eta=eta, kappa=float(worst[i]), points=centers, worst=worst,
                            mode="continuous-approximate", resolution=sample.resolution,
                            argmin=(tuple(centers[i].tolist()), float(radii[int(np.argmin(ratios[i]))])),
                            scales=radii)


# dyadic decomposition -----------------------------------------------------------

@dataclass
class DyadicCover:
    L: float
    cubes: list = field(default_factory=list)       # (k, j) pairs
    J: dict = field(default_factory=dict)           # k -> array of j
    V: np.ndarray | None = None                     # unit patch centers
    inner: ContinuousDomain | None = None
    outer: ContinuousDomain | None = None

    @staticmethod
    def cube_bounds(k, j):
        s = 2.0 ** k
        c = s * np.asarray(j, dtype=float)
        return c - s / 2, c + s / 2

    def in_inner(self, x):
        """Membership in the half-open union of the cubes of F-."""
        x = np.atleast_2d(x)
        out = np.zeros(len(x), dtype=bool)
        for k, j in self.cubes:
            a, b = self.cube_bounds(k, j)
            out |= np.all((x >= a) & (x < b), axis=1)
        return out


def dyadic_approximations(domain: ContinuousDomain, L: float, h: float = 1 / 16) -> DyadicCover:
    """Greedy maximal dyadic cubes of side >= 1 inside the domain, plus unit patches covering the rest.

    Cubes are Q_{2^k} + 2^k j = [2^k j - 2^(k-1), 2^k j + 2^(k-1))^d.  Scales
    are processed from the largest down; a cube is kept when it lies in the
    domain and is disjoint from the cubes already kept.
    """
    d = domain.dim
    half = L / 2
    if np.any(domain.lo <= -half) or np.any(domain.hi >= half):
        raise ValueError("domain must lie inside (-L/2, L/2)^d")
    extent = float(np.max(domain.hi - domain.lo))
    kmax = max(0, int(math.floor(math.log2(extent))) if extent >= 1 else -1)
    cover = DyadicCover(L=L)
    # occupancy on the half-integer grid: every cube has corners at multiples of 1/2
    glo = np.floor(domain.lo * 2) / 2 - 1
    gshape = tuple(np.ceil((domain.hi - glo) * 2).astype(int) + 2)
    occ = np.zeros(gshape, dtype=bool)

    if extent >= 1:
        for k in range(kmax, -1, -1):
            s = 2.0 ** k
            jlo = np.ceil((domain.lo + s / 2) / s - 1e-12).astype(int)
            jhi = np.floor((domain.hi - s / 2) / s + 1e-12).astype(int)
            if np.any(jhi < jlo):
                continue
            js = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(jlo, jhi)], indexing="ij"), -1).reshape(-1, d)
            lo = s * js - s / 2
            hi = lo + s
            ok = domain.contains_box(lo, hi)
            chosen = []
            for idx in np.flatnonzero(ok):
                a = np.round((lo[idx] - glo) * 2).astype(int)
                b = a + int(round(2 * s))
                sl = tuple(slice(x, y) for x, y in zip(a, b))
                if occ[sl].any():
                    continue
                occ[sl] = True
                chosen.append(js[idx])
                cover.cubes.append((k, tuple(int(v) for v in js[idx])))
            if chosen:
                cover.J[k] = np.array(chosen)

    # unit patches: sub-cells of side h outside F- that meet F
    lo = np.floor(domain.lo / h) * h
    n = np.ceil((domain.hi - lo) / h).astype(int) + 1
    axes = [lo[i] + h * np.arange(n[i]) for i in range(d)]
    corners = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    mids = corners + h / 2
    free = ~cover.in_inner(mids)
    hit = np.zeros(len(corners), dtype=bool)
    idx = np.flatnonzero(free)
    step = 1 << 16
    for s0 in range(0, len(idx), step):
        sel = idx[s0:s0 + step]
        hit[sel] = domain.meets_box(corners[sel], corners[sel] + h)
    v = np.unique(np.floor(mids[hit] + 0.5).astype(np.int64), axis=0) if hit.any() else np.zeros((0, d), np.int64)
    cover.V = v
    boxes = [cover.cube_bounds(k, j) for k, j in cover.cubes]
    if boxes:
        cover.inner = Rectilinear(boxes, kind="dyadic-inner")
    patches = [(np.maximum(p - 0.5, -half), np.minimum(p + 0.5, half)) for p in v]
    if boxes or patches:
        cover.outer = Rectilinear(boxes + patches, kind="dyadic-outer")
    return cover


def lattice_count_check(domain: ContinuousDomain, L: float, kappa: float | None = None, resolution=None):
    """L^-d #E_L next to |E| and the boundary correction |dE| / (kappa L)."""
    if domain.volume is None or domain.boundary is None:
        raise ValueError("exact volume and boundary measure required")
    if kappa is None:
        if resolution is None:
            resolution = float(np.linalg.norm(domain.hi - domain.lo)) / 200
        kappa = continuous_ahlfors_estimate(domain, resolution).kappa
    count = len(discretize(domain, L))
    return {"lhs": count / L ** domain.dim, "volume": domain.volume,
            "correction": domain.boundary / (kappa * L), "kappa": kappa, "count": count}
