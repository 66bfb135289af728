"""Orientation-preserving circle diffeomorphisms stored as monotone lifts.

A diffeomorphism is represented by its lift

    F(x) = x + mean_translation + sum_k (a_k cos 2 pi k x + b_k sin 2 pi k x)

on the real line, with the circle identified with [0, 1).  Internally the
periodic part is kept as complex coefficients c_k = a_k - i b_k so that
p(x) = Re sum_k c_k exp(2 pi i k x).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRID = 2 ** 12
ITERATE_CAP = 2 ** 14
OVERFLOW_GUARD = 1e300
INVERSE_TOL = 1e-12
_TRIM = 1e-18
# coefficients above this fraction of the grid bandwidth flag under-resolution
_TAIL_FRACTION = 0.375
RESOLUTION_TOL = 1e-10


class MonotonicityError(ValueError):
    """Raised when a lift fails F' > 0 on its grid."""


class ResolutionWarning(UserWarning):
    pass


def _trim(c):
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return c
    nz = np.nonzero(np.abs(c) > _TRIM)[0]
    return c[: nz[-1] + 1] if nz.size else c[:0]


def _eval_series(c, x, order=0):
    """Evaluate Re sum_k c_k (2 pi i k)^order e^{2 pi i k x} at arbitrary points."""
    x = np.asarray(x, dtype=float)
    out_shape = x.shape
    x = x.ravel()
    K = c.size
    if K == 0:
        return np.zeros(out_shape)
    k = np.arange(1, K + 1)
    cc = c * (2j * np.pi * k) ** order if order else c
    xm = np.mod(x, 1.0)
    if x.size * K <= _DIRECT_LIMIT:
        val = np.exp(2j * np.pi * np.outer(xm, k)) @ cc
    else:
        z = np.exp(2j * np.pi * xm)
        acc = np.full(x.size, cc[-1], dtype=complex)
        for j in range(K - 2, -1, -1):
            acc = acc * z + cc[j]
        val = acc * z
    return val.real.reshape(out_shape)


def _eval_pair(c, x):
    """Periodic part and its first derivative at arbitrary points (one pass)."""
    x = np.asarray(x, dtype=float)
    K = c.size
    if K == 0:
        return np.zeros(x.shape), np.zeros(x.shape)
    k = np.arange(1, K + 1)
    c1 = c * (2j * np.pi * k)
    xm = np.mod(x, 1.0)
    if x.size * K <= _DIRECT_LIMIT:
        E = np.exp(2j * np.pi * np.outer(xm.ravel(), k))
        return (E @ c).real.reshape(x.shape), (E @ c1).real.reshape(x.shape)
    z = np.exp(2j * np.pi * xm)
    a0 = np.full(x.shape, c[-1], dtype=complex)
    a1 = np.full(x.shape, c1[-1], dtype=complex)
    for j in range(K - 2, -1, -1):
        a0 = a0 * z + c[j]
        a1 = a1 * z + c1[j]
    return (a0 * z).real, (a1 * z).real


_OVERSAMPLE = 8
_STENCIL = 6  # half-width: degree 11 local interpolation
_DIRECT_LIMIT = 200_000


def _lagrange_weights(t, m=_STENCIL):
    """Weights for nodes -m+1..m at offsets t in [0, 1)."""
    nodes = np.arange(-m + 1, m + 1)
    w = np.empty((nodes.size, t.size))
    for a, j in enumerate(nodes):
        num = np.ones_like(t)
        den = 1.0
        for i in nodes:
            if i != j:
                num = num * (t - i)
                den *= j - i
        w[a] = num / den
    return nodes, w


def _interp_periodic(table, x):
    """Evaluate band-limited samples table (on a fine periodic grid) at points x."""
    n = table.size
    u = np.mod(x, 1.0) * n
    idx = np.floor(u).astype(np.int64)
    t = u - idx
    nodes, w = _lagrange_weights(t)
    out = np.zeros_like(t)
    for a, j in enumerate(nodes):
        out += w[a] * table[(idx + j) % n]
    return out


def _grid_series(c, G, order=0):
    """Exact samples of the (differentiated) periodic part on the G-point grid."""
    half = G // 2
    X = np.zeros(half + 1, dtype=complex)
    K = min(c.size, half - 1)
    if K:
        k = np.arange(1, K + 1)
        cc = c[:K] * (2j * np.pi * k) ** order if order else c[:K]
        X[1 : K + 1] = cc * (G / 2)
    return np.fft.irfft(X, n=G)


def _project(samples, G):
    """Constant term and coefficients c_k of real periodic samples on the G-grid."""
    X = np.fft.rfft(samples) / G
    mean = X[0].real
    c = 2.0 * X[1 : G // 2]
    return mean, _trim(c)


@dataclass(frozen=True, eq=False)
class CircleDiffeo:
    mean_translation: float
    coeffs: np.ndarray
    grid: int = DEFAULT_GRID
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.grid < 8 or self.grid % 2:
            raise ValueError("grid size must be an even integer >= 8")
        c = _trim(self.coeffs)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "mean_translation", float(self.mean_translation))
        d = self.deriv_grid()
        if not np.all(np.isfinite(d)) or d.min() <= 0:
            raise MonotonicityError(
                f"lift is not strictly increasing on the {self.grid}-point grid "
                f"(min F' = {d.min():.3e})"
            )

    # construction helpers
    @classmethod
    def from_pairs(cls, mean_translation, periodic, grid=DEFAULT_GRID):
        pairs = np.asarray(periodic, dtype=float).reshape(-1, 2) if len(periodic) else np.zeros((0, 2))
        return cls(mean_translation, pairs[:, 0] - 1j * pairs[:, 1], grid)

    @classmethod
    def from_lift_samples(cls, periodic_samples, grid):
        """Build from samples of F(x) - x on the grid (mean reduced mod 1)."""
        mean, c = _project(np.asarray(periodic_samples, dtype=float), grid)
        return cls(mean % 1.0, c, grid)

    @property
    def periodic(self):
        return [[float(z.real), float(-z.imag)] for z in self.coeffs]

    @property
    def bandwidth(self):
        return int(self.coeffs.size)

    def to_json(self):
        return {"mean_translation": self.mean_translation, "periodic": self.periodic, "grid": self.grid}

    @classmethod
    def from_json(cls, d):
        try:
            return cls.from_pairs(float(d["mean_translation"]), d.get("periodic", []), int(d.get("grid", DEFAULT_GRID)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed diffeomorphism record: {exc}") from exc

    # evaluation
    def points(self):
        return np.arange(self.grid) / self.grid

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.mean_translation + self._periodic_at(x)

    def deriv(self, x, order=1):
        x = np.asarray(x, dtype=float)
        d = self._periodic_at(x, order)
        return 1.0 + d if order == 1 else d

    def _fine_table(self, order):
        key = ("fine", order)
        if key not in self._cache:
            G = _OVERSAMPLE * max(self.grid, 2 * self.coeffs.size + 2)
            self._cache[key] = _grid_series(self.coeffs, G, order)
        return self._cache[key]

    def _periodic_at(self, x, order=0):
        if x.size * self.coeffs.size <= _DIRECT_LIMIT:
            return _eval_series(self.coeffs, x, order)
        flat = x.ravel()
        return _interp_periodic(self._fine_table(order), flat).reshape(x.shape)

    def lift_and_deriv(self, x):
        x = np.asarray(x, dtype=float)
        if x.size * self.coeffs.size <= _DIRECT_LIMIT:
            p, dp = _eval_pair(self.coeffs, x)
        else:
            p, dp = self._periodic_at(x, 0), self._periodic_at(x, 1)
        return x + self.mean_translation + p, 1.0 + dp

    def lift_grid(self):
        return self.points() + self.mean_translation + _grid_series(self.coeffs, self.grid)

    def deriv_grid(self, order=1):
        d = _grid_series(self.coeffs, self.grid, order)
        return 1.0 + d if order == 1 else d

    def resolution_error(self):
        """Size of the coefficients in the top part of the grid bandwidth."""
        cut = int(_TAIL_FRACTION * self.grid)
        tail = self.coeffs[cut:]
        return float(np.abs(tail).max()) if tail.size else 0.0

    def is_rotation(self):
        return self.coeffs.size == 0

    def __repr__(self):
        return f"CircleDiffeo(mean={self.mean_translation:.6g}, bandwidth={self.bandwidth}, grid={self.grid})"


@dataclass(frozen=True)
class GrowthTable:
    """Growth sequence values[n-1] = Gamma_n for n = 1..nmax."""

    values: np.ndarray

    @property
    def nmax(self):
        return int(self.values.size)

    def gamma(self, n):
        n = abs(int(n))
        if n == 0:
            return 1.0
        if n > self.nmax:
            raise IndexError(f"growth table holds n <= {self.nmax}, asked for {n}")
        return float(self.values[n - 1])

    def as_array(self, with_zero=False):
        return np.concatenate([[1.0], self.values]) if with_zero else self.values.copy()

    @classmethod
    def constant(cls, nmax, value=1.0):
        return cls(np.full(int(nmax), float(value)))


def identity(grid=DEFAULT_GRID):
    return CircleDiffeo(0.0, np.zeros(0), grid)


def rotation(alpha, grid=DEFAULT_GRID):
    return CircleDiffeo(float(alpha) % 1.0, np.zeros(0), grid)


def compose(f: CircleDiffeo, g: CircleDiffeo) -> CircleDiffeo:
    """The lift of f o g, reprojected onto the coarser of the two grids."""
    G = min(f.grid, g.grid)
    x = np.arange(G) / G
    y = g(x)
    samples = f(y) - x
    mean, c = _project(samples, G)
    try:
        out = CircleDiffeo(mean % 1.0, c, G)
    except MonotonicityError as exc:
        raise MonotonicityError(f"composite fails monotonicity; increase grid size ({exc})") from exc
    err = out.resolution_error()
    if err > RESOLUTION_TOL:
        warnings.warn(f"composite under-resolved on grid {G}: tail coefficient {err:.2e}", ResolutionWarning, stacklevel=2)
    return out


def invert_points(f: CircleDiffeo, y, tol=INVERSE_TOL, maxiter=100):
    """Solve F(x) = y for the lift by safeguarded Newton iteration."""
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    pmax = np.abs(f.coeffs).sum()
    lo = y - f.mean_translation - pmax - 1e-14
    hi = y - f.mean_translation + pmax + 1e-14
    x = y - f.mean_translation
    for _ in range(maxiter):
        F, dF = f.lift_and_deriv(x)
        r = F - y
        if np.abs(r).max() < tol * 0.01:
            break
        lo = np.where(r < 0, np.maximum(lo, x), lo)
        hi = np.where(r > 0, np.minimum(hi, x), hi)
        xn = x - r / dF
        bad = (xn <= lo) | (xn >= hi) | ~np.isfinite(xn)
        x = np.where(bad, 0.5 * (lo + hi), xn)
    F = f(x)
    if np.abs(F - y).max() > tol:
        raise ArithmeticError(f"inverse did not converge (residual {np.abs(F - y).max():.2e})")
    return x.reshape(shape)


def inverse(f: CircleDiffeo) -> CircleDiffeo:
    if "inverse" in f._cache:
        return f._cache["inverse"]
    if f.is_rotation():
        g = rotation(-f.mean_translation, f.grid)
    else:
        y = f.points()
        x = invert_points(f, y)
        g = CircleDiffeo.from_lift_samples(x - y, f.grid)
    f._cache["inverse"] = g
    g._cache["inverse"] = f
    return g


def iterate(f: CircleDiffeo, n: int, cap: int = ITERATE_CAP) -> CircleDiffeo:
    """f^n with f^{-n} = (f^{-1})^n; powers are cached on f."""
    n = int(n)
    if abs(n) > cap:
        raise ValueError(f"|n| = {abs(n)} exceeds iterate cap {cap}")
    if n == 0:
        return identity(f.grid)
    if n < 0:
        return iterate(inverse(f), -n, cap)
    if f.is_rotation():
        return rotation(n * f.mean_translation, f.grid)
    powers = f._cache.setdefault("powers", {1: f})
    if n in powers:
        return powers[n]
    half = iterate(f, n // 2, cap)
    out = compose(half, half)
    if n % 2:
        out = compose(f, out)
    powers[n] = out
    return out


def orbit_derivative(f: CircleDiffeo, n: int, x):
    """Lift values F^n(x) and chain-rule derivatives Df^n(x) along the orbit of x."""
    x = np.asarray(x, dtype=float)
    g = f if n >= 0 else inverse(f)
    y = x.copy()
    d = np.ones_like(x)
    for _ in range(abs(int(n))):
        y, dy = g.lift_and_deriv(y)
        d = d * dy
    return y, d


def _orbit_products(f, nmax, x):
    """Arrays (nmax, len(x)) of Df^n(x) for n = 1..nmax."""
    out = np.empty((nmax, x.size))
    y = x.copy()
    d = np.ones_like(x)
    for j in range(nmax):
        y, dy = f.lift_and_deriv(y)
        d = d * dy
        if not np.all(np.isfinite(d)) or d.max() > OVERFLOW_GUARD:
            raise OverflowError(f"derivative of f^{j + 1} exceeds {OVERFLOW_GUARD:g}")
        out[j] = d
    return out


def iterate_derivatives(f: CircleDiffeo, nmax: int, x=None):
    """Forward and backward chain-rule derivative tables on x (default: grid)."""
    x = f.points() if x is None else np.asarray(x, dtype=float)
    key = ("orbit", int(nmax), x.tobytes())
    if key in f._cache:
        return f._cache[key]
    fwd = _orbit_products(f, nmax, x)
    bwd = _orbit_products(inverse(f), nmax, x)
    f._cache[key] = (fwd, bwd)
    return fwd, bwd


def growth_sequence(f: CircleDiffeo, nmax: int) -> GrowthTable:
    """Gamma_n = max(||Df^n||, ||Df^{-n}||) by chain-rule products on the grid.

    Both sup norms are estimated from forward and backward orbits, using
    sup Df^{-n} = 1 / inf Df^n as a second sample of the same quantity.
    """
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    fwd, bwd = iterate_derivatives(f, nmax)
    vals = np.maximum.reduce([fwd.max(axis=1), bwd.max(axis=1), 1.0 / fwd.min(axis=1), 1.0 / bwd.min(axis=1)])
    if vals.max() > OVERFLOW_GUARD:
        raise OverflowError("growth sequence exceeds overflow guard")
    return GrowthTable(vals)


def rotation_number(f: CircleDiffeo, iterations: int = 1000):
    """(F^n(0)/n, 1/n) for n = iterations."""
    if iterations < 100:
        raise ValueError("rotation_number needs at least 100 iterations")
    if f.is_rotation():
        return f.mean_translation, 1.0 / iterations
    whole = 0.0
    y = 0.0
    for _ in range(iterations):
        y = float(f(np.array([y]))[0])
        k = np.floor(y)
        whole += k
        y -= k
    return (whole + y) / iterations, 1.0 / iterations


def rn_derivative(f: CircleDiffeo, n: int):
    """Grid samples of d(m o f^{-n})/dm, i.e. the derivative of the lift of f^{-n}."""
    _, d = orbit_derivative(f, -int(n), f.points())
    return d


def square_root_conjugated(h: CircleDiffeo, alpha: float) -> CircleDiffeo:
    """g = h o R_{alpha/2} o h^{-1}, so that g o g = h o R_alpha o h^{-1}."""
    return compose(h, compose(rotation(alpha / 2.0, h.grid), inverse(h)))


def conjugate_rotation(h: CircleDiffeo, alpha: float) -> CircleDiffeo:
    return compose(h, compose(rotation(alpha, h.grid), inverse(h)))


def cocycle_samples(f: CircleDiffeo, orbit_length: int, return_radius: float, start: float = 0.0):
    """Values Df^n(start) at times n where the orbit comes within return_radius of start."""
    if orbit_length < 1000:
        raise ValueError("orbit_length must be >= 1000")
    if not 0.0 < return_radius < 0.1:
        raise ValueError("return_radius must lie in (0, 0.1)")
    y = np.array([float(start)])
    d = 1.0
    out = []
    for _ in range(orbit_length):
        y, dy = f.lift_and_deriv(y)
        d *= float(dy[0])
        dist = abs(((y[0] - start) + 0.5) % 1.0 - 0.5)
        if dist < return_radius:
            out.append(d)
    if not out:
        warnings.warn("no near-returns found; cocycle sample is empty", RuntimeWarning, stacklevel=2)
    return np.array(out)
