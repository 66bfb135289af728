"""GNS space of omega_mu, modular data and block operators (Lebesgue picture).

The GNS space is a direct sum over blocks n in [-N, N] of L^2(circle), each
truncated to Fourier modes |m| <= M.  With T = h R_alpha h^-1:

    (pi(f) g)_n = sum_l  f^(l) o h^-1 o T^(2n - l) * g_{n-l}
    (lambda g)_n = g_{n-1}
    (Delta g)_n = delta_n g_n,           delta_n = D(T^(2n))
    (J g)_n = delta_n^(1/2) conj(g_{-n} o T^(2n))

Multiplication operators are Toeplitz compressions of the DFT of G grid
samples; their operator norm never exceeds the sampled sup.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import svds

from . import circle as cd
from .circle import CircleDiffeo
from .weyl import CircleMeasure, WeylElement, star


class PositivityError(ValueError):
    """A Radon-Nikodym density sample is not strictly positive."""


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Truncation:
    N: int
    M: int
    G: int = cd.DEFAULT_GRID

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.M < 4:
            raise ValueError("M must be >= 4")
        if self.G < 8 * self.M:
            raise ValueError(f"G = {self.G} must be >= 8M = {8 * self.M}")

    @property
    def dim(self):
        return 2 * self.M + 1

    @property
    def modes(self):
        return np.arange(-self.M, self.M + 1)

    @property
    def blocks(self):
        return range(-self.N, self.N + 1)

    def points(self):
        return np.arange(self.G) / self.G

    def to_json(self):
        return {"N": self.N, "M": self.M, "G": self.G}


# Fourier helpers on the G-grid

def fourier(samples):
    return np.fft.fft(samples) / samples.size


def mult_matrix(samples, M):
    """Compression to modes |m| <= M of multiplication by the sampled function."""
    c = fourier(np.asarray(samples, dtype=complex))
    k = np.arange(-M, M + 1)
    return c[(k[:, None] - k[None, :]) % c.size]


def project(samples, M):
    c = fourier(np.asarray(samples, dtype=complex))
    return c[np.arange(-M, M + 1) % c.size]


def grid_values(coef, G):
    """Trigonometric polynomial with modes -M..M sampled on the G-grid."""
    M = (coef.size - 1) // 2
    X = np.zeros(G, dtype=complex)
    X[np.arange(-M, M + 1) % G] = coef
    return np.fft.ifft(X) * G


def point_values(coef, x):
    M = (coef.size - 1) // 2
    k = np.arange(-M, M + 1)
    return np.exp(2j * np.pi * np.outer(x, k)) @ coef


@dataclass(eq=False)
class ModularData:
    """T = h R_alpha h^-1 with its densities delta_n = D(T^(2n)) on grids."""

    h_conj: CircleDiffeo
    alpha: float
    T: CircleDiffeo
    f: CircleDiffeo
    delta_samples: dict = field(default_factory=dict, repr=False)
    _pts: dict = field(default_factory=dict, repr=False)
    _growth: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_conjugacy(cls, h: CircleDiffeo, alpha: float, f: CircleDiffeo | None = None):
        alpha = float(alpha)
        if h.is_rotation() and h.mean_translation == 0.0:
            T = cd.rotation(alpha, h.grid)
            f2 = cd.rotation(2 * alpha, h.grid)
        else:
            T = cd.conjugate_rotation(h, alpha)
            f2 = f if f is not None else cd.conjugate_rotation(h, 2 * alpha)
        return cls(h, alpha, T, f2)

    @classmethod
    def rotation(cls, alpha: float, grid: int = cd.DEFAULT_GRID):
        return cls.from_conjugacy(cd.identity(grid), alpha)

    @classmethod
    def from_build(cls, build):
        """T is the square root H R_{beta/2} H^-1 of the final map f_K."""
        return cls.from_conjugacy(build.H, build.rotation_final / 2.0, build.f)

    @property
    def is_rotation(self):
        return self.h_conj.is_rotation() and self.h_conj.mean_translation == 0.0

    def hinv(self, G):
        """Lift values of h^-1 on the G-grid."""
        if G not in self._pts:
            x = np.arange(G) / G
            self._pts[G] = x.copy() if self.is_rotation else cd.invert_points(self.h_conj, x)
        return self._pts[G]

    def rotated_hinv(self, k, G):
        """h^-1 o T^k on the G-grid, i.e. h^-1(x) + k alpha."""
        return self.hinv(G) + k * self.alpha

    def T_power_points(self, k, G):
        """Lift values of T^k on the G-grid."""
        y = self.rotated_hinv(k, G)
        return y if self.is_rotation else self.h_conj(y)

    def delta(self, n, G):
        key = (int(n), int(G))
        if key not in self.delta_samples:
            if self.is_rotation or n == 0:
                d = np.ones(G)
            else:
                y = self.hinv(G)
                d = self.h_conj.deriv(y + 2 * n * self.alpha) / self.h_conj.deriv(y)
            if not np.all(np.isfinite(d)) or d.min() <= 0:
                raise PositivityError(f"delta_{n} has non-positive samples")
            self.delta_samples[key] = d
        return self.delta_samples[key]

    def delta_at(self, n, x):
        """delta_n at arbitrary points (closed form)."""
        x = np.asarray(x, dtype=float)
        if self.is_rotation or n == 0:
            return np.ones_like(x)
        y = cd.invert_points(self.h_conj, x)
        return self.h_conj.deriv(y + 2 * n * self.alpha) / self.h_conj.deriv(y)

    def delta_chain(self, n, G=None):
        """delta_n from chain-rule products along T^2 orbits (grid of f)."""
        if n == 0:
            return np.ones(self.f.grid)
        fwd, bwd = cd.iterate_derivatives(self.f, abs(n))
        return fwd[n - 1] if n > 0 else bwd[-n - 1]

    def growth(self, nmax):
        """Growth table of T^2."""
        for k, tab in self._growth.items():
            if k >= nmax:
                return cd.GrowthTable(tab.values[:nmax])
        tab = cd.growth_sequence(self.f, nmax)
        self._growth[nmax] = tab
        return tab

    def measure(self, G=None):
        """mu = (h^-1)_* Lebesgue, the measure of the state."""
        if self.is_rotation:
            return CircleMeasure.lebesgue()
        return CircleMeasure.pushforward(cd.inverse(self.h_conj), G or self.h_conj.grid)

    def cocycle_symmetry_residual(self, n, G):
        """sup |delta_{-n} * (delta_n o T^(-2n)) - 1|."""
        x = np.mod(self.T_power_points(-2 * n, G), 1.0)
        return float(np.abs(self.delta(-n, G) * self.delta_at(n, x) - 1).max())

    def centrality_precondition(self, N, G):
        """(min, max) of delta_n over |n| <= N; finite and positive means mu o T^(2n) ~ mu."""
        lo, hi = np.inf, 0.0
        for n in range(-N, N + 1):
            d = self.delta(n, G)
            lo, hi = min(lo, d.min()), max(hi, d.max())
        return float(lo), float(hi), bool(np.isfinite(hi) and lo > 0)


class BlockOperator:
    """Operator on sum_{|n| <= N} C^size stored as a sparse map of dense blocks."""

    def __init__(self, N: int, size: int, blocks: dict | None = None):
        self.N = N
        self.size = size
        self.blocks = blocks if blocks is not None else {}

    def block(self, r, c):
        b = self.blocks.get((r, c))
        return b if b is not None else np.zeros((self.size, self.size), dtype=complex)

    def adjoint(self):
        return BlockOperator(self.N, self.size, {(c, r): b.conj().T for (r, c), b in self.blocks.items()})

    def _combine(self, other, sign):
        out = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            out[k] = out[k] + sign * v if k in out else sign * v
        return BlockOperator(self.N, self.size, out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scale(self, c):
        return BlockOperator(self.N, self.size, {k: c * v for k, v in self.blocks.items()})

    def __matmul__(self, other):
        by_row = {}
        for (k, c), b in other.blocks.items():
            by_row.setdefault(k, []).append((c, b))
        out = {}
        for (r, k), a in self.blocks.items():
            for c, b in by_row.get(k, ()):
                prod = a @ b
                out[(r, c)] = out[(r, c)] + prod if (r, c) in out else prod
        return BlockOperator(self.N, self.size, out)

    def apply(self, vec):
        """vec has shape (2N+1, size), row i holding block n = i - N."""
        out = np.zeros_like(vec, dtype=complex)
        for (r, c), b in self.blocks.items():
            out[r + self.N] += b @ vec[c + self.N]
        return out

    def offsets(self):
        return sorted({r - c for r, c in self.blocks})

    def to_dense(self):
        d = (2 * self.N + 1) * self.size
        A = np.zeros((d, d), dtype=complex)
        s = self.size
        for (r, c), b in self.blocks.items():
            i, j = (r + self.N) * s, (c + self.N) * s
            A[i : i + s, j : j + s] = b
        return A

    def norm(self, dense_limit: int = 2500):
        """Operator 2-norm (exact for single-diagonal coupling)."""
        if not self.blocks:
            return 0.0
        offs = self.offsets()
        if len(offs) == 1:
            return max(float(np.linalg.norm(b, 2)) for b in self.blocks.values())
        if (2 * self.N + 1) * self.size <= dense_limit:
            return float(np.linalg.norm(self.to_dense(), 2))
        return _sparse_norm(self)

    def norm_upper(self):
        """Schur-test bound sqrt(max row sum * max column sum) of block 2-norms; always >= norm()."""
        rows, cols = {}, {}
        for (r, c), b in self.blocks.items():
            v = float(np.linalg.norm(b, 2))
            rows[r] = rows.get(r, 0.0) + v
            cols[c] = cols.get(c, 0.0) + v
        if not rows:
            return 0.0
        return float(np.sqrt(max(rows.values()) * max(cols.values())))

    def block_norms(self):
        return {k: float(np.linalg.norm(b, 2)) for k, b in self.blocks.items()}

    def max_block_diff(self, other, rows=None, modes=None):
        """max over blocks (restricted to rows, and to mode window |m| <= modes) of ||A - B||_2."""
        keys = set(self.blocks) | set(other.blocks)
        M = (self.size - 1) // 2
        sl = slice(M - modes, M + modes + 1) if modes is not None else slice(None)
        worst = 0.0
        for k in keys:
            if rows is not None and k[0] not in rows:
                continue
            d = (self.block(*k) - other.block(*k))[sl, sl]
            worst = max(worst, float(np.linalg.norm(d, 2)))
        return worst

    def to_json(self, meta=None):
        out = {"N": self.N, "size": self.size, "blocks": []}
        for (r, c) in sorted(self.blocks):
            b = self.blocks[(r, c)]
            out["blocks"].append({"row": r, "col": c, "data": np.stack([b.real, b.imag], axis=-1).reshape(-1).tolist()})
        if meta:
            out.update(meta)
        return out


def _sparse_matrix(op: BlockOperator):
    s = op.size
    rows, cols, data = [], [], []
    base_r, base_c = np.indices((s, s))
    for (r, c), b in op.blocks.items():
        rows.append(base_r.ravel() + (r + op.N) * s)
        cols.append(base_c.ravel() + (c + op.N) * s)
        data.append(b.ravel())
    d = (2 * op.N + 1) * s
    return sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(d, d))


def _sparse_norm(op: BlockOperator):
    """Largest singular value by Lanczos on the assembled block-sparse matrix."""
    A = _sparse_matrix(op)
    v0 = np.random.default_rng(12345).normal(size=A.shape[0]).astype(complex)
    s = svds(A, k=1, return_singular_vectors=False, v0=v0, tol=0, maxiter=5000)
    return float(s[0])


def identity_operator(tr: Truncation, size=None):
    size = size or tr.dim
    return BlockOperator(tr.N, size, {(n, n): np.eye(size, dtype=complex) for n in tr.blocks})


def diagonal_operator(tr: Truncation, fn, size=None):
    """Block-diagonal operator with blocks fn(n)."""
    return BlockOperator(tr.N, size or tr.dim, {(n, n): fn(n) for n in tr.blocks})


def represent(f: WeylElement, md: ModularData, tr: Truncation) -> BlockOperator:
    """Truncated GNS representative of W(f)."""
    if f.n_extent > 2 * tr.N:
        warnings.warn(f"support |l| <= {f.n_extent} leaks outside the block range 2N = {2 * tr.N}", TruncationWarning, stacklevel=2)
    blocks = {}
    k = np.arange(-tr.M, tr.M + 1)
    base = md.hinv(tr.G)
    for l in f.n_support:
        sl = f.slice(l)
        ms = np.array(list(sl), dtype=float)
        vs = np.array(list(sl.values()), dtype=complex)
        rows = [n for n in tr.blocks if -tr.N <= n - l <= tr.N]
        if not rows:
            continue
        E = np.exp(2j * np.pi * np.outer(base, ms))
        shifts = (2 * np.array(rows) - l) * md.alpha
        vals = E @ (vs[:, None] * np.exp(2j * np.pi * np.outer(ms, shifts)))
        c = np.fft.fft(vals, axis=0) / tr.G
        idx = (k[:, None] - k[None, :]) % tr.G
        for j, n in enumerate(rows):
            blocks[(n, n - l)] = c[idx, j]
    return BlockOperator(tr.N, tr.dim, blocks)


def represent_function(coef: dict, md: ModularData, tr: Truncation, alpha="0") -> BlockOperator:
    """pi(H) for H(z) = sum_m coef[m] z^m (the n = 0 slice)."""
    return represent(WeylElement({(m, 0): v for m, v in coef.items()}, alpha), md, tr)


def shift_lambda(k: int, tr: Truncation) -> BlockOperator:
    """lambda^k: (lambda^k g)_n = g_{n-k}."""
    if abs(k) > 2 * tr.N:
        raise ValueError("|k| must be <= 2N")
    eye = np.eye(tr.dim, dtype=complex)
    return BlockOperator(tr.N, tr.dim, {(n, n - k): eye.copy() for n in tr.blocks if -tr.N <= n - k <= tr.N})


def modular_delta(md: ModularData, n: int, tr: Truncation):
    """(delta_n, 1/delta_n, condition number) on the truncation grid."""
    if abs(n) > tr.N:
        raise ValueError("|n| must be <= N")
    d = md.delta(n, tr.G)
    return d, 1.0 / d, float(d.max() / d.min())


def modular_operator(md: ModularData, tr: Truncation, power: float = 1.0) -> BlockOperator:
    return diagonal_operator(tr, lambda n: mult_matrix(md.delta(n, tr.G) ** power, tr.M))


def xi_vector(tr: Truncation):
    v = np.zeros((2 * tr.N + 1, tr.dim), dtype=complex)
    v[tr.N, tr.M] = 1.0
    return v


def apply_delta_power(md: ModularData, tr: Truncation, vec, power=0.5):
    out = np.empty_like(vec, dtype=complex)
    for n in tr.blocks:
        i = n + tr.N
        out[i] = project(md.delta(n, tr.G) ** power * grid_values(vec[i], tr.G), tr.M)
    return out


def apply_J(md: ModularData, tr: Truncation, vec):
    """(J y)_n = delta_n^(1/2) conj(y_{-n} o T^(2n))."""
    out = np.empty_like(vec, dtype=complex)
    for n in tr.blocks:
        src = vec[-n + tr.N]
        if md.is_rotation:
            shifted = grid_values(src * np.exp(2j * np.pi * tr.modes * (2 * n * md.alpha)), tr.G)
        else:
            shifted = point_values(src, md.T_power_points(2 * n, tr.G))
        out[n + tr.N] = project(np.sqrt(md.delta(n, tr.G)) * np.conj(shifted), tr.M)
    return out


def apply_S(md: ModularData, tr: Truncation, vec):
    """J Delta^(1/2) applied pointwise, projected once at the end.

    (S y)_n = delta_n^(1/2) conj((delta_{-n}^(1/2) y_{-n}) o T^(2n)).
    """
    out = np.empty_like(vec, dtype=complex)
    for n in tr.blocks:
        src = vec[-n + tr.N]
        if md.is_rotation:
            out[n + tr.N] = np.conj(src[::-1]) * np.exp(2j * np.pi * tr.modes * (2 * n * md.alpha))
            continue
        pts = md.T_power_points(2 * n, tr.G)
        vals = point_values(src, pts) * np.sqrt(md.delta_at(-n, np.mod(pts, 1.0)))
        out[n + tr.N] = project(np.sqrt(md.delta(n, tr.G)) * np.conj(vals), tr.M)
    return out


def tomita_check(f: WeylElement, md: ModularData, tr: Truncation) -> float:
    """||J Delta^(1/2) pi(f) xi - pi(star f) xi|| / ||pi(f) xi||."""
    xi = xi_vector(tr)
    x = represent(f, md, tr).apply(xi)
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0
    s = apply_S(md, tr, x)
    y = represent(star(f), md, tr).apply(xi)
    return float(np.linalg.norm(s - y) / nx)


def vector_state(f: WeylElement, md: ModularData, tr: Truncation) -> complex:
    """<pi(f) xi, xi>."""
    x = represent(f, md, tr).apply(xi_vector(tr))
    return complex(x[tr.N, tr.M])


def product_residual(f: WeylElement, g: WeylElement, md: ModularData, tr: Truncation, modes=None):
    """max block norm of pi(f * g) - pi(f) pi(g) over interior blocks and modes."""
    lhs = represent(f @ g, md, tr)
    rhs = represent(f, md, tr) @ represent(g, md, tr)
    reach = f.n_extent + g.n_extent
    rows = range(-tr.N + reach, tr.N - reach + 1)
    if modes is None:
        modes = tr.M // 2
    return lhs.max_block_diff(rhs, rows=set(rows), modes=modes)


def crossed_product_check(H, md: ModularData, tr: Truncation, k: int = 1, alpha="0") -> float:
    """Interior residual of lambda^k pi(H) lambda^-k = pi(H o R^(-2k)).

    H is a dict m -> coefficient or samples on the truncation grid.
    """
    if not isinstance(H, dict):
        c = fourier(np.asarray(H, dtype=complex))
        half = tr.M // 2
        H = {int(m): complex(c[m % tr.G]) for m in range(-half, half + 1)}
    rho = {m: v * np.exp(-2j * np.pi * m * 2 * k * md.alpha) for m, v in H.items()}
    lam = shift_lambda(k, tr)
    lhs = lam @ represent_function(H, md, tr, alpha) @ shift_lambda(-k, tr)
    rhs = represent_function(rho, md, tr, alpha)
    rows = {n for n in tr.blocks if -tr.N <= n - k <= tr.N}
    return lhs.max_block_diff(rhs, rows=rows)


def cyclicity_rank(md: ModularData, tr: Truncation, tol: float = 1e-10):
    """Smallest rank over blocks n of {pi(delta_(m,n)) xi : |m| <= M}."""
    worst = tr.dim
    for n in tr.blocks:
        y = md.rotated_hinv(n, tr.G)
        cols = np.stack([project(np.exp(2j * np.pi * m * y), tr.M) for m in tr.modes], axis=1)
        s = np.linalg.svd(cols, compute_uv=False)
        worst = min(worst, int((s > tol * s[0]).sum()))
    return worst


def _local_refine(md, n, G, idx, sign, width=64):
    x0 = idx / G
    xs = x0 + np.linspace(-1.0 / G, 1.0 / G, 2 * width + 1)
    vals = md.delta_at(n, np.mod(xs, 1.0))
    return float(vals.max() if sign > 0 else vals.min())


def merge_intervals(iv):
    iv = sorted(iv)
    out = []
    for a, b in iv:
        if out and a <= out[-1][1] * (1 + 1e-15):
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


def delta_spectrum_report(md: ModularData, tr: Truncation, refine: bool = True):
    """Sampled ranges of delta_n and 1/delta_n over |n| <= N and their union."""
    rows = []
    iv = []
    for n in tr.blocks:
        d = md.delta(n, tr.G)
        lo, hi = float(d.min()), float(d.max())
        if refine and not md.is_rotation and n != 0:
            lo = min(lo, _local_refine(md, n, tr.G, int(d.argmin()), -1))
            hi = max(hi, _local_refine(md, n, tr.G, int(d.argmax()), 1))
        rows.append({"n": n, "min": lo, "max": hi, "inv_min": 1.0 / hi, "inv_max": 1.0 / lo})
        iv += [(lo, hi), (1.0 / hi, 1.0 / lo)]
    return {"blocks": rows, "intervals": merge_intervals(iv)}
