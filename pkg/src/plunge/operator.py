"""Finite matrix of the discretized concentration operator.

For a frequency set Omega (integer vectors m, frequencies m/L) and a spatial
domain F inside the fundamental cell (-L/2, L/2)^d, the operator
chi_F F_L^-1 chi_Omega F_L shares its nonzero spectrum with the #Omega x #Omega
matrix

    G[m, m'] = L^-d * ft(chi_F)((m - m') / L).

Entries only depend on m - m', so they are gathered from a table of the
transform over the difference set Omega - Omega.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .geometry import ContinuousDomain, ExactTransformUnavailable, GridSet

__all__ = ["ConcentrationMatrix", "ft_indicator", "assemble", "trace_stats",
           "nystrom_oracle", "write_matrix_csv", "DEFAULT_CAP"]

DEFAULT_CAP = 6000


def _raster_cell(max_xi):
    return min(0.01, 1.0 / (8 * max_xi)) if max_xi > 0 else 0.01


def _raster_matrices(F, axes, h):
    """Cell mask of F at spacing h and per-axis cell transforms on ``axes``."""
    n = np.maximum(1, np.ceil((F.hi - F.lo) / h).astype(int))
    edges = [F.lo[i] + h * np.arange(n[i] + 1) for i in range(F.dim)]
    mids = [0.5 * (e[:-1] + e[1:]) for e in edges]
    if np.prod(n) > 5e7:
        raise ValueError(f"rasterization grid {tuple(n)} too large; coarsen the cell size")
    mesh = np.meshgrid(*mids, indexing="ij")
    mask = F.contains(np.stack([m.ravel() for m in mesh], axis=1)).reshape(tuple(n))
    mats = []
    for e, ax in zip(edges, axes):
        a, b = e[:-1, None], e[1:, None]
        xi = np.asarray(ax, float)[None, :]
        mats.append(h * np.sinc(h * xi) * np.exp(-1j * np.pi * (a + b) * xi))
    return mask, mats


def ft_indicator(F: ContinuousDomain, xi, mode: str = "auto", cell: float | None = None):
    """Transform of the indicator of F, int_F exp(-2 pi i x.xi) dx, at points xi (n, d).

    mode: "exact" (closed form, error if unavailable), "rasterized" (sum of
    closed-form cell transforms) or "auto" (exact when available).
    Returns (values, mode_tag).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != F.dim:
        xi = xi.reshape(-1, F.dim)
    if mode in ("auto", "exact"):
        try:
            return F.ft(xi), "exact"
        except ExactTransformUnavailable:
            if mode == "exact":
                raise
    h = cell if cell is not None else _raster_cell(float(np.max(np.abs(xi))) if xi.size else 0.0)
    mask, mats = _raster_matrices(F, [xi[:, i] for i in range(F.dim)], h)
    acc = np.tensordot(mats[0], mask.astype(float), axes=([0], [0]))
    for A in mats[1:]:
        acc = np.einsum("pi...,ip->p...", acc, A)
    return acc, f"rasterized(h={h:g})"


def _ft_table(F, axes, mode, cell):
    if mode in ("auto", "exact"):
        try:
            return F.ft_grid(axes), "exact"
        except ExactTransformUnavailable:
            if mode == "exact":
                raise
    h = cell if cell is not None else _raster_cell(max(float(np.max(np.abs(a))) for a in axes))
    mask, mats = _raster_matrices(F, axes, h)
    acc = mask.astype(complex)
    for A in mats:
        acc = np.tensordot(acc, A, axes=([0], [0]))
    return acc, f"rasterized(h={h:g})"


@dataclass(eq=False)
class ConcentrationMatrix:
    """Lazily gathered Hermitian matrix L^-d ft_F((m - m')/L) over Omega.

    ``table`` holds ft_F on the difference grid; ``origin`` is the table index
    of the zero difference.  ``blocks`` lists the symmetry sectors used by the
    eigensolver (see :meth:`sector_matrices`).
    """

    omega: GridSet
    domain: ContinuousDomain
    table: np.ndarray
    mode: str
    symmetric_axes: tuple = ()
    centers2: np.ndarray | None = None      # twice the reflection centers
    cap: int = DEFAULT_CAP
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def L(self):
        return self.omega.L

    @property
    def dim(self):
        return self.omega.dim

    @property
    def size(self):
        return len(self.omega)

    @property
    def is_real(self):
        return not np.iscomplexobj(self.table)

    @property
    def scale(self):
        return self.L ** (-self.dim)

    def _lookup(self, diff):
        span = (np.array(self.table.shape) - 1) // 2
        return self.table[tuple((diff + span).T)]

    def gather(self, rows, cols):
        """Entries for index arrays rows x cols (outer product)."""
        p = self.omega.points
        diff = p[rows][:, None, :] - p[cols][None, :, :]
        return self.scale * self._lookup(diff.reshape(-1, self.dim)).reshape(len(rows), len(cols))

    @property
    def entries(self):
        if self._dense is None:
            idx = np.arange(self.size)
            self._dense = self.gather(idx, idx)
        return self._dense

    def diagonal(self):
        return np.full(self.size, self.scale * self._lookup(np.zeros((1, self.dim), np.int64))[0])

    # symmetry reduction ------------------------------------------------------
    def sector_matrices(self):
        """Yield the diagonal blocks of the matrix in the basis adapted to axis reflections.

        For every axis a in ``symmetric_axes`` Omega is invariant under
        m_a -> c_a - m_a and the kernel is even in that axis, so the matrix
        commutes with the reflections and splits into 2^k sectors labelled by
        the characters sigma in {+1, -1}^k.
        """
        axes = list(self.symmetric_axes)
        if not axes:
            idx = np.arange(self.size)
            yield (), self.gather(idx, idx)
            return
        pts = self.omega.points
        c2 = self.centers2
        index = {tuple(p): i for i, p in enumerate(pts.tolist())}
        group = list(itertools.product((0, 1), repeat=len(axes)))

        def act(g, q):
            q = q.copy()
            for flip, a in zip(g, axes):
                if flip:
                    q[..., a] = c2[a] - q[..., a]
            return q

        # orbit representatives: the point with the largest coordinates in each orbit
        canon = pts.copy()
        for a in axes:
            canon[:, a] = np.maximum(pts[:, a], c2[a] - pts[:, a])
        reps = np.unique(canon, axis=0)
        fixed = np.stack([2 * reps[:, a] == c2[a] for a in axes], axis=1)
        orbit = 2 ** (len(axes) - fixed.sum(axis=1))
        for sigma in itertools.product((1, -1), repeat=len(axes)):
            sig = np.array(sigma)
            ok = ~np.any(fixed & (sig == -1), axis=1)
            r = reps[ok]
            if len(r) == 0:
                continue
            w = np.sqrt(orbit[ok].astype(float))
            block = None
            for g in group:
                chi = float(np.prod([s for s, f in zip(sigma, g) if f])) if any(g) else 1.0
                diff = r[:, None, :] - act(g, r)[None, :, :]
                vals = chi * self._lookup(diff.reshape(-1, self.dim)).reshape(len(r), len(r))
                block = vals if block is None else block + vals
            block = block * (self.scale * np.outer(w, w) / len(group))
            yield sigma, block

    def sector_sizes(self):
        axes = list(self.symmetric_axes)
        if not axes:
            return [self.size]
        pts = self.omega.points
        canon = pts.copy()
        for a in axes:
            canon[:, a] = np.maximum(pts[:, a], self.centers2[a] - pts[:, a])
        reps = np.unique(canon, axis=0)
        fixed = np.stack([2 * reps[:, a] == self.centers2[a] for a in axes], axis=1)
        sizes = []
        for sigma in itertools.product((1, -1), repeat=len(axes)):
            ok = ~np.any(fixed & (np.array(sigma) == -1), axis=1)
            sizes.append(int(ok.sum()))
        return sizes


def _reflection_axes(omega, table, tol=1e-13):
    """Axes along which both Omega and the kernel table are reflection invariant."""
    pts = omega.points
    c2 = pts.min(axis=0) + pts.max(axis=0)
    found = []
    scale = np.max(np.abs(table)) if table.size else 1.0
    S = omega.as_set() if len(pts) else set()
    for a in range(omega.dim):
        if not np.allclose(table, np.flip(table, axis=a), rtol=0, atol=tol * scale):
            continue
        refl = pts.copy()
        refl[:, a] = c2[a] - refl[:, a]
        if all(tuple(q) in S for q in refl.tolist()):
            found.append(a)
    return tuple(found), c2


def assemble(omega: GridSet, F: ContinuousDomain, mode: str = "auto", cap: int = DEFAULT_CAP,
             cell: float | None = None, symmetry: bool = True) -> ConcentrationMatrix:
    """Matrix L^-d ft_F((m - m')/L) over Omega.

    The cap bounds the largest dense block the eigensolver will see: the
    full size, or the largest reflection sector when symmetry applies.
    """
    if len(omega) == 0:
        raise ValueError("empty frequency set")
    if F.dim != omega.dim:
        raise ValueError("dimension mismatch between Omega and F")
    L = omega.L
    tol = 1e-12 * L
    if np.any(F.lo < -L / 2 - tol) or np.any(F.hi > L / 2 + tol):
        raise ValueError("F escapes the fundamental cell (-L/2, L/2)^d; spectra would alias")
    pts = omega.points
    span = pts.max(axis=0) - pts.min(axis=0)
    axes = [np.arange(-s, s + 1) / L for s in span]
    table, tag = _ft_table(F, axes, mode, cell)
    peak = np.max(np.abs(table))
    if np.max(np.abs(table.imag)) <= 1e-14 * max(peak, 1.0):
        table = np.ascontiguousarray(table.real)
    # Hermitian check on the table: ft(-q) = conj(ft(q))
    rev = np.conj(table[(slice(None, None, -1),) * table.ndim])
    if np.max(np.abs(rev - table)) > 1e-12 * max(peak, 1.0):
        raise ValueError("indicator transform is not conjugate symmetric; matrix would not be Hermitian")
    sym, c2 = _reflection_axes(omega, table) if symmetry else ((), None)
    M = ConcentrationMatrix(omega, F, table, tag, sym, c2, cap)
    biggest = max(M.sector_sizes())
    if biggest > cap:
        raise ValueError(f"largest dense block {biggest} exceeds cap {cap}")
    return M


def _autocorrelation_counts(omega):
    """N(q) = #{(m, m') in Omega^2 : m - m' = q} on the difference grid."""
    pts = omega.points
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    ind = np.zeros(tuple(span + 1))
    ind[tuple((pts - lo).T)] = 1.0
    shape = tuple(2 * span + 1)
    axes = tuple(range(len(shape)))
    f = np.fft.rfftn(ind, s=shape, axes=axes)
    ac = np.fft.irfftn(f * np.conj(f), s=shape, axes=axes)
    ac = np.fft.fftshift(ac)
    # after the shift index span corresponds to q = 0 for odd lengths
    return np.rint(ac).astype(np.int64)


def trace_stats(M: ConcentrationMatrix):
    """tr(G) and tr(G^2) = ||G||_F^2 from the difference table."""
    if M._dense is not None:
        G = M._dense
        return {"trace": float(np.real(np.trace(G))), "trace_sq": float(np.sum(np.abs(G) ** 2))}
    trace = M.size * M.scale * float(np.real(M._lookup(np.zeros((1, M.dim), np.int64))[0]))
    counts = _autocorrelation_counts(M.omega)
    trace_sq = M.scale ** 2 * float(np.sum(counts * np.abs(M.table) ** 2))
    return {"trace": trace, "trace_sq": trace_sq}


def nystrom_oracle(omega: GridSet, F: ContinuousDomain, grid_n: int, supersample: int = 8):
    """Eigenvalues of the quadrature-discretized kernel L^-d sum_m exp(2 pi i m(x - y)/L) on F.

    Midpoint grid of n^d cells over F's bounding box, each weighted by its
    volume times the fraction of the cell inside F (estimated by
    supersampling).  Since the kernel factors as V V^*, the weighted matrix
    W^1/2 V V^* W^1/2 has the squared singular values of W^1/2 V as its
    nonzero eigenvalues.
    """
    d = omega.dim
    if grid_n ** d > 4096:
        raise ValueError("oracle grid too large (n^d > 4096)")
    L = omega.L
    h = (F.hi - F.lo) / grid_n
    mids = [F.lo[i] + h[i] * (np.arange(grid_n) + 0.5) for i in range(d)]
    X = np.stack([m.ravel() for m in np.meshgrid(*mids, indexing="ij")], axis=1)
    sub = (np.arange(supersample) + 0.5) / supersample - 0.5
    offs = np.stack([m.ravel() for m in np.meshgrid(*([sub] * d), indexing="ij")], axis=1) * h
    frac = np.zeros(len(X))
    for o in offs:
        frac += F.contains(X + o)
    w = np.prod(h) * frac / len(offs)
    keep = w > 0
    X, w = X[keep], w[keep]
    V = np.exp(2j * np.pi * (X @ omega.points.T) / L) * L ** (-d / 2)
    s = np.linalg.svd(np.sqrt(w)[:, None] * V, compute_uv=False)
    return np.sort(s ** 2)[::-1]


def write_matrix_csv(M: ConcentrationMatrix, path):
    G = M.entries
    with open(path, "w") as fh:
        fh.write("row,col,re,im\n")
        for i in range(G.shape[0]):
            for j in range(G.shape[1]):
                z = complex(G[i, j])
                fh.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")
