"""Local trigonometric frames with a Gevrey window, and the energy estimates
that feed Israel's counting lemma.

Window: theta(x) = sin(pi/2 * H(x)) with H the normalized primitive of the
bump exp(-knob * (1 - x^2)^(-p)), p = 1/alpha by default.  Then theta = 0 on
(-inf, -1], theta = 1 on [1, inf) and theta(-x)^2 + theta(x)^2 = 1 exactly
(H(-x) = 1 - H(x)).

Partition of (-W/2, W/2): I_j = x_j + W/(3 2^(|j|+1)) [-1, 1) with
x_j = sign(j) W/2 (1 - 2^-|j|), D_j = I_j u I_{j+1}, and
phi_{j,k}(x) = sqrt(2/|D_j|) theta_j(x) exp(2 pi i x k / |D_j|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import comb, gammaincc, gamma as _gamma
from scipy.spatial import cKDTree

from .geometry import GridSet, box, discrete_boundary
from .operator import assemble
from .spectrum import eigenvalues, plunge_count

__all__ = ["Window", "build_window", "AxisPartition", "FramePartition", "partition",
           "FrameVector", "frame_vector", "Indicator", "TrigPolynomial", "random_trig_polynomials",
           "tight_frame_residual", "IndexClassification", "classify", "energy_sums",
           "israel_certificate", "suggest_parameters", "lattice_energy", "ps_shape", "gamma_med_shape"]


# ----------------------------------------------------------------------------
# window

class Window:
    """Gevrey window theta and the transforms of its two unit profiles."""

    def __init__(self, alpha: float, knob: float = 0.1, power: float | None = None,
                 n_primitive: int = 1 << 15, n_samples: int = 1 << 14, pad: int = 16):
        if not 0 < alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if knob <= 0:
            raise ValueError("profile knob must be positive")
        self.alpha, self.knob = float(alpha), float(knob)
        self.power = 1.0 / alpha if power is None else float(power)
        self._build_primitive(n_primitive)
        self._build_transform(n_samples, pad)
        self.fit = self.decay_fit()

    # bump and primitive ------------------------------------------------------
    def bump(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        t = 1.0 - x[inside] ** 2
        with np.errstate(over="ignore", divide="ignore"):
            out[inside] = np.exp(-self.knob * t ** (-self.power))
        return out

    def _build_primitive(self, n):
        # cumulative integral of the bump on [-1, 0] by 8-point Gauss panels
        edges = np.linspace(-1.0, 0.0, n + 1)
        gx, gw = np.polynomial.legendre.leggauss(8)
        a, b = edges[:-1, None], edges[1:, None]
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * gx
        panel = (0.5 * (b - a) * gw * self.bump(nodes)).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(panel)])
        half = cum[-1]
        if not half > 0 or not np.isfinite(half):
            raise ArithmeticError("normalizing integral of the bump failed")
        self._Z = 2 * half
        self._spline = CubicHermiteSpline(edges, cum / self._Z, self.bump(edges) / self._Z)

    def H(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        neg = x <= 0
        xn = np.clip(x[neg], -1.0, 0.0)
        out[neg] = self._spline(xn)
        xp = np.clip(-x[~neg], -1.0, 0.0)
        out[~neg] = 1.0 - self._spline(xp)
        out[x <= -1] = 0.0
        out[x >= 1] = 1.0
        return out

    def theta(self, x):
        return np.sin(0.5 * np.pi * self.H(x))

    __call__ = theta

    # unit profiles -----------------------------------------------------------
    def profile(self, u, side=1):
        """psi_+(u) = theta(3u - 1) theta(5 - 6u); psi_-(u) = psi_+(1 - u)."""
        u = np.asarray(u, dtype=float)
        if side < 0:
            u = 1.0 - u
        return self.theta(3 * u - 1) * self.theta(5 - 6 * u)

    def _build_transform(self, n, pad):
        u = np.arange(n) / n
        samples = self.profile(u)
        m = n * pad
        spec = np.fft.fft(samples, m) / n
        omega = np.fft.fftfreq(m, d=1.0 / n)       # spacing 1/pad
        order = np.argsort(omega)
        self._omega = omega[order]
        self._step = 1.0 / pad
        # modulate to the support midpoint: g(w) = exp(i pi w) psi_hat(w) is smooth and slowly varying
        self._g = spec[order] * np.exp(1j * np.pi * self._omega)
        self.samples, self.sample_spacing = samples, 1.0 / n
        self.norm2 = float(np.sum(samples ** 2) / n)     # int psi^2 = 1/2

    def psi_hat(self, omega, side=1, degree: int = 15):
        """Fourier transform of the unit profile, interpolated from the padded FFT table."""
        w = np.asarray(omega, dtype=float)
        shape = w.shape
        w = w.ravel()
        if side < 0:
            # psi_-(u) = psi_+(1 - u)  =>  hat = exp(-2 pi i w) conj(hat_+(w))
            return (np.exp(-2j * np.pi * w) * np.conj(self.psi_hat(w, 1, degree))).reshape(shape)
        wmax = self._omega[-1] - (degree + 1) * self._step
        out = np.zeros(len(w), dtype=complex)
        ok = np.abs(w) <= wmax
        x = (w[ok] - self._omega[0]) / self._step
        base = np.floor(x).astype(int) - degree // 2
        t = x - base
        j = np.arange(degree + 1)
        weights = (-1.0) ** j * comb(degree, j)
        diff = t[:, None] - j[None, :]
        hit = np.isclose(diff, 0.0, atol=1e-13)
        vals = self._g[base[:, None] + j[None, :]]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = weights / diff
            num = np.sum(q * vals, axis=1)
            den = np.sum(q, axis=1)
            res = num / den
        rows = np.any(hit, axis=1)
        if rows.any():
            res[rows] = vals[rows][hit[rows]]
        out[ok] = res * np.exp(-1j * np.pi * w[ok])
        return out.reshape(shape)

    def decay_fit(self, lo: float = 1.0, hi: float = 200.0, floor: float = 1e-13):
        """Upper envelope fit log|psi_hat(w)| <= A - a |w|^(1 - alpha) over [lo, hi]."""
        w = np.arange(lo, hi, 0.25)
        mag = np.abs(self.psi_hat(w))
        keep = mag > floor * np.abs(self.psi_hat(np.array([0.0])))[0]
        w, mag = w[keep], mag[keep]
        if len(w) < 8:
            return {"A": float("nan"), "a": float("nan"), "residual": float("nan"), "range": (lo, hi)}
        # envelope: maxima over blocks of unit length
        blocks = np.floor(w).astype(int)
        env_w, env_m = [], []
        for b in np.unique(blocks):
            sel = blocks == b
            i = np.argmax(mag[sel])
            env_w.append(w[sel][i])
            env_m.append(mag[sel][i])
        env_w, env_m = np.array(env_w), np.log(np.array(env_m))
        X = np.column_stack([np.ones_like(env_w), env_w ** (1 - self.alpha)])
        coef, *_ = np.linalg.lstsq(X, env_m, rcond=None)
        a = -coef[1]
        A = float(np.max(np.log(mag) + a * w ** (1 - self.alpha)))
        resid = env_m - X @ coef
        return {"A": A, "a": float(a), "residual": float(np.sqrt(np.mean(resid ** 2))),
                "range": (float(w[0]), float(w[-1]))}

    def envelope(self, omega):
        """Fitted upper bound exp(A - a |w|^(1 - alpha)) of |psi_hat|."""
        w = np.abs(np.asarray(omega, dtype=float))
        return np.exp(self.fit["A"] - self.fit["a"] * w ** (1 - self.alpha))


def build_window(alpha: float, profile_knob: float = 0.1, **kw) -> Window:
    return Window(alpha, profile_knob, **kw)


# ----------------------------------------------------------------------------
# partition

@dataclass(frozen=True)
class AxisPartition:
    """Dyadically graded intervals of (-W/2, W/2)."""

    W: float

    def x(self, j):
        j = np.asarray(j)
        return np.sign(j) * self.W / 2 * (1 - 2.0 ** (-np.abs(j)))

    def I_len(self, j):
        return self.W / (3 * 2.0 ** np.abs(np.asarray(j)))

    def I(self, j):
        c, h = self.x(j), self.I_len(j) / 2
        return c - h, c + h

    def D_len(self, j):
        return self.I_len(j) + self.I_len(np.asarray(j) + 1)

    def D(self, j):
        a, _ = self.I(j)
        return a, a + self.D_len(j)

    def indices(self, min_len):
        """All j with |D_j| >= min_len, in increasing order."""
        if min_len <= 0:
            raise ValueError("truncation length must be positive")
        out = []
        j = 0
        while self.D_len(j) >= min_len:
            out.append(j)
            j += 1
        j = -1
        while self.D_len(j) >= min_len:
            out.insert(0, j)
            j -= 1
        return np.array(out, dtype=int)

    def theta_j(self, win: Window, j, x):
        x = np.asarray(x, dtype=float)
        return (win.theta(2 * (x - self.x(j)) / self.I_len(j))
                * win.theta(-2 * (x - self.x(j + 1)) / self.I_len(j + 1)))

    def theta_hat_j(self, win: Window, j, xi):
        """|D| exp(-2 pi i l xi) psi_hat(|D| xi) with l the left end of D_j."""
        xi = np.asarray(xi, dtype=float)
        Dl = self.D_len(j)
        left = self.D(j)[0]
        side = 1 if j >= 0 else -1
        return Dl * np.exp(-2j * np.pi * left * xi) * win.psi_hat(Dl * xi, side)


@dataclass
class FramePartition:
    W: tuple
    delta: float
    axes: list = field(default_factory=list)

    @property
    def dim(self):
        return len(self.W)

    @property
    def W_max(self):
        return max(self.W)

    def indices(self, axis, min_len=None):
        return self.axes[axis].indices(self.delta / 2 if min_len is None else min_len)

    def admissible(self):
        """Index vectors j with min_i |D_{j_i}| >= delta."""
        per = [self.axes[i].indices(self.delta) for i in range(self.dim)]
        mesh = np.meshgrid(*per, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def M(self, j):
        return np.array([self.axes[i].D_len(int(j[i])) for i in range(self.dim)])


def partition(W_vector, delta: float, L: float | None = None) -> FramePartition:
    W = tuple(float(w) for w in np.atleast_1d(W_vector))
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if any(w <= 0 for w in W) or (L is not None and any(w > L for w in W)):
        raise ValueError("widths must satisfy 0 < W_i <= L")
    return FramePartition(W, float(delta), [AxisPartition(w) for w in W])


# ----------------------------------------------------------------------------
# frame vectors

@dataclass
class FrameVector:
    part: FramePartition
    win: Window
    j: tuple
    k: tuple

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(len(x), dtype=complex)
        for i, ax in enumerate(self.part.axes):
            Dl = ax.D_len(self.j[i])
            out *= (math.sqrt(2 / Dl) * ax.theta_j(self.win, self.j[i], x[:, i])
                    * np.exp(2j * np.pi * x[:, i] * self.k[i] / Dl))
        return out

    def axis_values(self, i, x):
        ax = self.part.axes[i]
        Dl = ax.D_len(self.j[i])
        return math.sqrt(2 / Dl) * ax.theta_j(self.win, self.j[i], x) * np.exp(2j * np.pi * x * self.k[i] / Dl)

    def axis_ft(self, i, xi):
        ax = self.part.axes[i]
        Dl = ax.D_len(self.j[i])
        return math.sqrt(2 / Dl) * ax.theta_hat_j(self.win, self.j[i], np.asarray(xi, float) - self.k[i] / Dl)

    def ft(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        out = np.ones(len(xi), dtype=complex)
        for i in range(self.part.dim):
            out *= self.axis_ft(i, xi[:, i])
        return out

    @property
    def center(self):
        return np.array(self.k) / self.part.M(self.j)


def frame_vector(p: FramePartition, w: Window, j, k) -> FrameVector:
    j = tuple(int(v) for v in np.atleast_1d(j))
    k = tuple(int(v) for v in np.atleast_1d(k))
    for i, ji in enumerate(j):
        if p.axes[i].D_len(ji) < p.delta / 2:
            raise ValueError(f"j={ji} on axis {i} lies outside the partition truncation")
    return FrameVector(p, w, j, k)


# ----------------------------------------------------------------------------
# tight frame check

class Indicator:
    """Indicator of a box [a, b].

    On the faces it takes the value 1/sqrt(2), so |f|^2 is the mean of its
    one-sided limits there and trapezoidal energies stay second order.
    """

    def __init__(self, a, b):
        self.a = np.atleast_1d(np.asarray(a, float))
        self.b = np.atleast_1d(np.asarray(b, float))
        self.norm2 = float(np.prod(self.b - self.a))

    def breakpoints(self, i):
        return (self.a[i], self.b[i])

    def axis_factors(self, i, x):
        x = np.asarray(x, float)
        v = ((x > self.a[i]) & (x < self.b[i])).astype(float)
        v[np.isclose(x, self.a[i], rtol=0, atol=1e-14) | np.isclose(x, self.b[i], rtol=0, atol=1e-14)] = math.sqrt(0.5)
        return [v]

    def weights(self):
        return np.ones(1)


class TrigPolynomial:
    """f(x) = sum_p a_p exp(2 pi i p.x / W) on the box prod (-W_i/2, W_i/2).

    Stored as a low-rank separable expansion: coefficient tensor ``coef``
    over per-axis frequency lists.
    """

    def __init__(self, W, coef):
        self.W = tuple(float(w) for w in np.atleast_1d(W))
        self.coef = np.asarray(coef, dtype=complex)
        self.P = [(n - 1) // 2 for n in self.coef.shape]
        self.norm2 = float(np.prod(self.W) * np.sum(np.abs(self.coef) ** 2))

    def breakpoints(self, i):
        return ()

    def axis_matrix(self, i, x):
        p = np.arange(-self.P[i], self.P[i] + 1)
        return np.exp(2j * np.pi * np.outer(np.asarray(x, float), p) / self.W[i])

    def sample(self, axes_x):
        if len(axes_x) == 1:
            return self.axis_matrix(0, axes_x[0]) @ self.coef
        U1 = self.axis_matrix(0, axes_x[0])
        U2 = self.axis_matrix(1, axes_x[1])
        return U1 @ self.coef @ U2.T


def random_trig_polynomials(n, W, degree=6, seed=0):
    rng = np.random.default_rng(seed)
    W = tuple(np.atleast_1d(W))
    shape = (2 * degree + 1,) * len(W)
    return [TrigPolynomial(W, rng.normal(size=shape) + 1j * rng.normal(size=shape)) for _ in range(n)]


class _FrameTestFunction:
    """Adapter turning a frame vector into a test function."""

    def __init__(self, fv: FrameVector):
        self.fv = fv
        self.norm2 = 1.0

    def breakpoints(self, i):
        return ()

    def sample(self, axes_x):
        vals = [self.fv.axis_values(i, x) for i, x in enumerate(axes_x)]
        out = vals[0]
        for v in vals[1:]:
            out = np.multiply.outer(out, v)
        return out


def _sample(f, axes_x):
    if isinstance(f, Indicator):
        vals = [f.axis_factors(i, x)[0] for i, x in enumerate(axes_x)]
        out = vals[0]
        for v in vals[1:]:
            out = np.multiply.outer(out, v)
        return out
    if isinstance(f, FrameVector):
        f = _FrameTestFunction(f)
    return f.sample(axes_x)


def _aligned_base(left, length, breaks):
    """Smallest N0 such that every breakpoint inside the interval falls on the grid left + length n / N0."""
    n0 = 1
    for b in breaks:
        t = (b - left) / length
        if not 0 < t < 1:
            continue
        fr = Fraction(t).limit_denominator(1 << 20)
        if abs(float(fr) - t) > 1e-12:
            raise ValueError("breakpoint not rationally aligned with the partition")
        n0 = n0 * fr.denominator // math.gcd(n0, fr.denominator)
    return n0


def _axis_grid(ax, j, f, i, N):
    a, _ = ax.D(j)
    Dl = ax.D_len(j)
    return a + Dl * np.arange(N) / N


def tight_frame_residual(p: FramePartition, w: Window, functions, deep: float = 1e-10,
                         tol: float = 1e-10, n_start: int = 32, n_budget: int = 1 << 20):
    """max_f |sum_{j,k} |<f, Phi_jk>|^2 - 2^d ||f||^2| / ||f||^2.

    For each j the coefficients <f, Phi_jk> are the (aliased) DFT of
    f theta_j sampled on D_j; the grid is refined by doubling until the
    coefficient energy is stable to ``tol`` (with one Richardson step, which
    removes the h^2 term left by jumps of f on the grid).  Intervals with
    |D_j| < deep * W are dropped.
    """
    d = p.dim
    if isinstance(functions, (Indicator, TrigPolynomial, FrameVector)):
        functions = [functions]
    per_axis = [p.axes[i].indices(deep * p.W[i]) for i in range(d)]
    worst = 0.0
    max_n = 0
    for f in functions:
        norm2 = float(getattr(f, "norm2", 1.0))
        total = 0.0
        for jv in np.stack(np.meshgrid(*per_axis, indexing="ij"), -1).reshape(-1, d):
            base = [_aligned_base(p.axes[i].D(jv[i])[0], p.axes[i].D_len(jv[i]),
                                  f.breakpoints(i) if hasattr(f, "breakpoints") else ())
                    for i in range(d)]
            N = n_start
            prev = None
            while True:
                Ns = [b * N for b in base]
                if max(Ns) > n_budget:
                    raise RuntimeError(f"truncation budget exhausted at j={tuple(jv)} (N={Ns})")
                axes_x = [_axis_grid(p.axes[i], jv[i], f, i, Ns[i]) for i in range(d)]
                g = _sample(f, axes_x)
                for i in range(d):
                    th = p.axes[i].theta_j(w, jv[i], axes_x[i])
                    shape = [1] * d
                    shape[i] = -1
                    g = g * th.reshape(shape)
                # coefficients of g on D_j against sqrt(2/|D|) exp(2 pi i x k/|D|)
                c = np.fft.fftn(g)
                scale = 1.0
                for i in range(d):
                    Dl = p.axes[i].D_len(jv[i])
                    scale *= 2.0 * Dl / Ns[i] ** 2
                e = scale * float(np.sum(np.abs(c) ** 2))
                if prev is not None and abs(e - prev) <= tol * max(norm2, 1e-300):
                    e += (e - prev) / 3
                    break
                prev = e
                N *= 2
            max_n = max(max_n, max(Ns))
            total += e
        worst = max(worst, abs(total - 2 ** d * norm2) / norm2)
    return {"residual": worst, "max_grid": max_n, "deep": deep, "n_j": [len(a) for a in per_axis]}


# ----------------------------------------------------------------------------
# index classification

@dataclass
class IndexClassification:
    part: FramePartition
    omega: GridSet
    s: float
    low: dict = field(default_factory=dict)      # j -> (n, d) array of k
    med: dict = field(default_factory=dict)
    high_enumerated: dict = field(default_factory=dict)
    lj_inclusion: bool = True

    @property
    def counts(self):
        return {"low": int(sum(len(v) for v in self.low.values())),
                "med": int(sum(len(v) for v in self.med.values())),
                "high_enumerated": int(sum(self.high_enumerated.values()))}


def _exterior_distance(y, lo, hi, w):
    """Weighted distance from real lattice-unit points y to the integer points outside the box [lo, hi]."""
    r = np.rint(y)
    base = (w * (r - y)) ** 2
    tot = base.sum(axis=1)
    best = np.full(len(y), np.inf)
    for a in range(y.shape[1]):
        for m_a in (np.minimum(r[:, a], lo[a] - 1), np.maximum(r[:, a], hi[a] + 1)):
            cand = tot - base[:, a] + (w[a] * (m_a - y[:, a])) ** 2
            best = np.minimum(best, cand)
    return np.sqrt(best)


def _distances(omega, scale_vec, kpts):
    """dist(k, M E_L) and dist(k, M E_L^c) for the diagonal scaling M_j / L."""
    pts = omega.points
    w = scale_vec / omega.L
    inside = cKDTree(pts * w).query(kpts, k=1)[0]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, omega.dim)
    member = omega.as_set()
    holes = np.array([g for g in grid.tolist() if tuple(g) not in member], dtype=float).reshape(-1, omega.dim)
    out = _exterior_distance(kpts / w, lo, hi, w)
    if len(holes):
        out = np.minimum(out, cKDTree(holes * w).query(kpts, k=1)[0])
    return inside, out


def classify(p: FramePartition, omega: GridSet, s: float) -> IndexClassification:
    """Split k in Z^d, for each admissible j, by distance to M_j E_L and M_j E_L^c."""
    if len(omega) == 0:
        raise ValueError("E_L must be nonempty")
    if s < 1:
        raise ValueError("s must be at least 1")
    cls = IndexClassification(p, omega, float(s))
    bnd = discrete_boundary(omega).points
    for jv in p.admissible():
        Mj = p.M(jv)
        pts = omega.points * Mj / omega.L
        lo = np.floor(pts.min(axis=0) - s) - 1
        hi = np.ceil(pts.max(axis=0) + s) + 1
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        K = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, p.dim)
        d_in, d_out = _distances(omega, Mj, K)
        low = d_out >= s
        high = d_in >= s
        med = ~low & ~high
        key = tuple(int(v) for v in jv)
        cls.low[key] = K[low].astype(np.int64)
        cls.med[key] = K[med].astype(np.int64)
        cls.high_enumerated[key] = int(high.sum())
        if med.any():
            d_bnd = cKDTree(bnd * Mj / omega.L).query(K[med], k=1)[0]
            cls.lj_inclusion &= bool(np.all(d_bnd < s))
    return cls


# ----------------------------------------------------------------------------
# energies

def _axis_coeffs(fv, i, m, L):
    return fv.axis_ft(i, np.asarray(m, float) / L)


def lattice_energy(fv: FrameVector, omega: GridSet, complement: bool, win: Window,
                   tail_target: float = 1e-18):
    """L^-d sum over E_L (or its complement) of |F Phi(m/L)|^2.

    The complement sum is taken directly over the bounding box of E_L
    widened by a margin in which the coefficients decay below the fitted
    envelope target; the mass outside is bounded with the envelope.
    Returns (value, tail_bound).
    """
    L, d = omega.L, omega.dim
    pts = omega.points
    if not complement:
        vals = np.ones(len(pts))
        for i in range(d):
            vals *= np.abs(_axis_coeffs(fv, i, pts[:, i], L)) ** 2
        return float(vals.sum()) / L ** d, 0.0
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    beta = 1 - win.alpha
    a_fit, A_fit = win.fit["a"], win.fit["A"]
    # omega-distance beyond which 2|D| exp(2A - 2a w^beta) summed is below the target
    w_t = ((2 * A_fit - math.log(tail_target)) / (2 * a_fit)) ** (1 / beta)
    axis_vals, axis_tail, axis_m = [], [], []
    for i in range(d):
        Dl = fv.part.axes[i].D_len(fv.j[i])
        c = fv.k[i] / Dl * L
        span_lo = int(min(lo[i], math.floor(c - L * w_t / Dl)))
        span_hi = int(max(hi[i], math.ceil(c + L * w_t / Dl)))
        m = np.arange(span_lo, span_hi + 1)
        v = np.abs(_axis_coeffs(fv, i, m, L)) ** 2
        # envelope bound of sum_{|Dl m/L - k| > w_t} 2 |D| env^2, by an integral with step Dl/L
        # omega-distance from the packet centre to the nearer window edge (>= w_t by construction)
        x0 = max((Dl / L) * min(c - span_lo, span_hi - c), w_t)
        integral = (1 / beta) * (2 * a_fit) ** (-1 / beta) * _gamma(1 / beta) * gammaincc(1 / beta, 2 * a_fit * x0 ** beta)
        tail = 2 * 2 * Dl * math.exp(2 * A_fit) * (L / Dl) * integral + 2 * 2 * Dl * math.exp(2 * A_fit - 2 * a_fit * x0 ** beta)
        axis_vals.append(v)
        axis_tail.append(tail / L)     # as a fraction of the per-axis total L
        axis_m.append(m)
    # window part: all m in the widened box, minus E_L
    window_sum = 1.0
    for v in axis_vals:
        window_sum *= float(v.sum())
    inside = np.ones(len(pts))
    for i in range(d):
        inside *= axis_vals[i][pts[:, i] - axis_m[i][0]]
    if d == 1:
        mask = np.ones(len(axis_m[0]), dtype=bool)
        mask[pts[:, 0] - axis_m[0][0]] = False
        comp = float(axis_vals[0][mask].sum())
    else:
        comp = window_sum - float(inside.sum())
    outside = -math.expm1(sum(math.log1p(-min(t, 0.5)) for t in axis_tail)) * L ** d
    return (comp + outside) / L ** d, outside / L ** d


def _k2_diag(omega: GridSet, F_lo, F_hi):
    """x -> (T^2)(x, x) for the 1-D operator on the interval F."""
    from .operator import _autocorrelation_counts
    pts = omega.points
    L = omega.L
    span = int(pts.max() - pts.min())
    q = np.arange(-span, span + 1)
    N = _autocorrelation_counts(omega).ravel().astype(float)
    ft = box(F_hi - F_lo).ft(q[:, None] / L) * np.exp(-2j * np.pi * 0.5 * (F_lo + F_hi) * q / L)

    def k2(x):
        x = np.asarray(x, float)
        return np.real(np.exp(2j * np.pi * np.outer(x, q) / L) @ (N * ft)) / L ** 2

    return k2


def _gauss_integral(fn, a, b, panels=64, order=16):
    edges = np.linspace(a, b, panels + 1)
    gx, gw = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
    return float(np.sum(0.5 * (hi - lo) * gw * fn(x.ravel()).reshape(x.shape)))


def energy_sums(cls: IndexClassification, w: Window, omega: GridSet | None = None, L: float | None = None):
    """Sum over Gamma^low of L^-d sum_{E_L^c} |F Phi|^2 and over Gamma^high of L^-d sum_{E_L} |F Phi|^2.

    For admissible j the high part is the exact per-j total
    L^-d #E_L prod|D_{j_i}| minus the enumerated low and medium terms; the
    non-admissible j contribute L^-d #E_L (prod 2W_i - prod sum_{|D|>=delta} |D_j|).
    """
    omega = cls.omega if omega is None else omega
    p = cls.part
    Ld = omega.L ** p.dim
    n = len(omega)
    low_sum, low_tail = 0.0, 0.0
    high_sum = 0.0
    for jv in p.admissible():
        key = tuple(int(v) for v in jv)
        total = n / Ld * float(np.prod(p.M(jv)))
        enumerated = 0.0
        for kk in cls.low[key]:
            fv = FrameVector(p, w, key, tuple(int(v) for v in kk))
            val, tail = lattice_energy(fv, omega, True, w)
            low_sum += val
            low_tail += tail
            enumerated += lattice_energy(fv, omega, False, w)[0]
        for kk in cls.med[key]:
            fv = FrameVector(p, w, key, tuple(int(v) for v in kk))
            enumerated += lattice_energy(fv, omega, False, w)[0]
        high_sum += max(total - enumerated, 0.0)
    big = np.prod([sum(p.axes[i].D_len(j) for j in p.axes[i].indices(p.delta)) for i in range(p.dim)])
    small = n / Ld * (np.prod([2 * Wi for Wi in p.W]) - big)
    high_sum += small
    if low_sum > 0 and low_tail > 0.01 * low_sum:
        raise RuntimeError(f"complement tail bound {low_tail:.3g} exceeds 1% of the low sum {low_sum:.3g}")
    med = cls.counts["med"]
    return {"low_sum": low_sum, "high_sum": high_sum, "med_count": med,
            "low_tail": low_tail, "high_small_j": small}


# ----------------------------------------------------------------------------
# Israel certificate

def israel_certificate(omega: GridSet, W, L: float, s: float, delta: float, eps: float,
                       alpha: float = 0.3, window: Window | None = None, knob: float = 0.1):
    """Check Israel's counting lemma on the tight frame {Phi_jk} (bound 2^d) for T = T_{Omega, F}.

    F = prod (-W_i/2, W_i/2).  Hypothesis: sum_{Gamma^high} ||T Phi||^2 +
    sum_{Gamma^low} ||(I - T) Phi||^2 <= 2^d eps^2 / 2.  Conclusion:
    #M_eps(T) <= 2^(1-d) #Gamma^med.
    """
    win = window if window is not None else Window(alpha, knob)
    W = tuple(float(x) for x in np.atleast_1d(W))
    d = len(W)
    if omega.L != L:
        omega = GridSet(omega.dim, L, omega.points)
    F = box(*W)
    M = assemble(omega, F)
    G = M.entries
    spec = eigenvalues(M)
    p = partition(W, delta, L)
    cls = classify(p, omega, s)
    Ld = L ** d
    pts = omega.points
    n = len(omega)

    def coeff_matrix(key, ks):
        C = np.ones((len(ks), n), dtype=complex)
        for i in range(d):
            Dl = p.axes[i].D_len(key[i])
            xi = pts[:, i][None, :] / L - ks[:, i][:, None] / Dl
            C *= math.sqrt(2 / Dl) * p.axes[i].theta_hat_j(win, key[i], xi)
        return C

    low_part, high_part, low_tail = 0.0, 0.0, 0.0
    exact_high = d == 1
    if exact_high:
        k2 = _k2_diag(omega, -W[0] / 2, W[0] / 2)
    for jv in p.admissible():
        key = tuple(int(v) for v in jv)
        lows, meds = cls.low[key], cls.med[key]
        if len(lows):
            C = coeff_matrix(key, lows)
            inner = np.sum(np.abs(C) ** 2, axis=1) / Ld
            quad = np.real(np.einsum("km,mn,kn->k", C.conj(), G, C)) / Ld
            for idx, kk in enumerate(lows):
                comp, tail = lattice_energy(FrameVector(p, win, key, tuple(int(v) for v in kk)), omega, True, win)
                low_part += comp - (inner[idx] - quad[idx])
                low_tail += tail
        # sum over all k of ||T Phi_jk||^2, then remove the low and medium k
        if exact_high:
            ax = p.axes[0]
            a, b = ax.D(key[0])
            total = 2 * _gauss_integral(lambda x: ax.theta_j(win, key[0], x) ** 2 * k2(x), a, b)
        else:
            total = n / Ld * float(np.prod(p.M(jv)))
        enum = 0.0
        for ks in (lows, meds):
            if len(ks):
                C = coeff_matrix(key, ks)
                if exact_high:
                    enum += float(np.sum(np.real(np.einsum("km,mn,kn->k", C.conj(), G, C)))) / Ld
                else:
                    enum += float(np.sum(np.abs(C) ** 2)) / Ld
        high_part += max(total - enum, 0.0)
    # indices with min |D_{j_i}| < delta: all k
    if exact_high:
        ax = p.axes[0]
        big = ax.indices(delta)

        def one_minus_s(x):
            s_sum = np.zeros_like(x)
            for j in big:
                s_sum += ax.theta_j(win, j, x) ** 2
            return 1.0 - s_sum

        # integrate on the geometric partition so every panel sees smooth data
        edges = sorted({ax.D(j)[0] for j in big} | {ax.D(j)[1] for j in big} | {-W[0] / 2, W[0] / 2})
        small = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            small += 2 * _gauss_integral(lambda x: one_minus_s(x) * k2(x), a, b, panels=8)
    else:
        big = np.prod([sum(p.axes[i].D_len(j) for j in p.axes[i].indices(delta)) for i in range(d)])
        small = n / Ld * (np.prod([2 * w_ for w_ in W]) - big)
    high_part += small
    lhs = low_part + high_part
    threshold = 2 ** d / 2 * eps ** 2
    met = lhs <= threshold
    count = plunge_count(spec, eps)
    med = cls.counts["med"]
    bound = 2.0 ** (1 - d) * med
    return {"hypothesis_lhs": lhs, "threshold": threshold, "hypothesis_met": bool(met),
            "conclusion_count": count, "bound": bound, "holds": bool((not met) or count <= bound),
            "flag": "verified" if met else "hypothesis-not-met",
            "low_part": low_part, "high_part": high_part, "high_small_j": small, "low_tail": low_tail,
            "gamma_counts": cls.counts, "lj_inclusion": cls.lj_inclusion,
            "params": {"W": W, "L": L, "s": s, "delta": delta, "eps": eps, "alpha": win.alpha, "knob": win.knob}}


def suggest_parameters(omega: GridSet, W, L: float, eps: float, alpha: float = 0.3,
                       knob: float = 0.1, s_grid=(2, 3, 4, 5, 6, 8, 10, 12), window: Window | None = None):
    """Pick delta so that the small-interval term uses at most a quarter of the
    hypothesis budget, then the smallest s on the grid meeting the hypothesis."""
    win = window if window is not None else Window(alpha, knob)
    W = tuple(float(x) for x in np.atleast_1d(W))
    d = len(W)
    threshold = 2 ** d / 2 * eps ** 2
    n = len(omega)
    # the small-j term is at most L^-d #Omega (prod 2W - prod sum_{|D|>=delta}|D|) and
    # sum_{|D_j| < delta} |D_j| < 4 delta per axis
    delta = min(0.5, threshold / 4 / (n / L ** d * 4 * d * max(2 * w_ for w_ in W) ** (d - 1)))
    for s in s_grid:
        cert = israel_certificate(omega, W, L, s, delta, eps, window=win)
        if cert["hypothesis_met"]:
            return {"delta": delta, "s": s, "certificate": cert}
    return {"delta": delta, "s": None, "certificate": None}


def ps_shape(A: float, eps: float, alpha: float, boundary: float, kappa: float = 1.0,
             W_max: float = 1.0, eta: float = 1.0, d: int = 1) -> float:
    """s = A log(max{W_max, 1/eta}^(d-1) |dE| / (kappa eps))^(1/(1-alpha))."""
    arg = max(W_max, 1.0 / eta) ** (d - 1) * boundary / (kappa * eps)
    if arg <= 1:
        raise ValueError("logarithm argument must exceed 1")
    return A * math.log(arg) ** (1.0 / (1.0 - alpha))


def gamma_med_shape(W_max: float, boundary: float, kappa: float, delta: float, s: float,
                    d: int, eta: float = 1.0) -> float:
    """max{W_max, 1/eta}^(d-1) (|dE|/kappa) max{log(W_max/delta), 1}^d s^d."""
    return (max(W_max, 1.0 / eta) ** (d - 1) * boundary / kappa
            * max(math.log(W_max / delta), 1.0) ** d * s ** d)
