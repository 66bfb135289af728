"""Smooth-class seminorms rho_{k,l} and the commutator-norm bound.

    rho_{k,l}(f) = sup_n (|n| + 1)^k || D^l psi_n ||_inf,
    psi_n = f^(n) o R^-n o h^-1,

with D = z d/dz, which in angle coordinates is (2 pi i)^-1 d/dx.  Derivatives
are spectral on the G-grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import circle as cd
from .circle import CircleDiffeo
from .gns import ModularData, Truncation, represent
from .dirac import commutator_parts, dirac_deformed
from .weyl import WeylElement, as_alpha, star, twisted_convolution


class MajorantExceeded(ArithmeticError):
    """Partial sums outgrew the functional-calculus majorant by more than a factor 10."""


def _hinv(h: CircleDiffeo, G: int):
    key = ("hinv_grid", G)
    if key not in h._cache:
        x = np.arange(G) / G
        h._cache[key] = x.copy() if h.is_rotation() and h.mean_translation == 0 else cd.invert_points(h, x)
    return h._cache[key]


def slice_samples(f: WeylElement, n: int, h: CircleDiffeo, G: int):
    """psi_n = f^(n) o R^-n o h^-1 on the G-grid."""
    return f.slice_values(n, _hinv(h, G) - n * float(f.alpha))


def spectral_derivative(samples):
    """z d/dz of a periodic function given by grid samples."""
    G = samples.size
    k = np.fft.fftfreq(G, 1.0 / G)
    c = np.fft.fft(samples)
    if G % 2 == 0:
        c[G // 2] = 0.0
    return np.fft.ifft(k * c)


def all_slice_samples(f: WeylElement, h: CircleDiffeo, G: int) -> dict:
    """n -> psi_n on the G-grid for every n in the shift support."""
    if not f.terms:
        return {}
    ns = sorted(f.n_support)
    ms = sorted({m for m, _ in f.terms})
    mi = {m: j for j, m in enumerate(ms)}
    ni = {n: j for j, n in enumerate(ns)}
    C = np.zeros((len(ms), len(ns)), dtype=complex)
    for (m, n), v in f.terms.items():
        C[mi[m], ni[n]] = v
    mv = np.array(ms, dtype=float)
    a = float(f.alpha)
    C *= np.exp(-2j * np.pi * np.outer(mv, np.array(ns) * a))
    vals = np.exp(2j * np.pi * np.outer(_hinv(h, G), mv)) @ C
    return {n: vals[:, ni[n]] for n in ns}


def refined_sup(samples, candidates: int = 3, width: int = 16) -> float:
    """sup |p| of the trigonometric interpolant of grid samples.

    The largest local maxima on the grid are located on a fine local grid and
    then polished with a bounded scalar maximisation.
    """
    G = samples.size
    a = np.abs(samples)
    peaks = np.flatnonzero((a >= np.roll(a, 1)) & (a >= np.roll(a, -1)))
    if peaks.size == 0:
        return float(a.max())
    top = peaks[np.argsort(a[peaks])[::-1][:candidates]]
    c = np.fft.fft(samples) / G
    k = np.fft.fftfreq(G, 1.0 / G)
    if G % 2 == 0:
        c[G // 2] = 0.0
    keep = np.abs(c) > 0
    k, c = k[keep], c[keep]

    def p_abs(x):
        return np.abs(np.exp(2j * np.pi * np.outer(np.atleast_1d(x), k)) @ c)

    step = 1.0 / (width * G)
    x = (top[:, None] + np.linspace(-1.0, 1.0, 2 * width + 1)[None, :]) / G
    vals = p_abs(x.ravel()).reshape(x.shape)
    best = max(float(a.max()), float(vals.max()))
    for j in range(x.shape[0]):
        x0 = x[j, int(np.argmax(vals[j]))]
        r = minimize_scalar(lambda t: -p_abs(t)[0], bounds=(x0 - step, x0 + step), method="bounded",
                            options={"xatol": 1e-14 / G})
        best = max(best, -float(r.fun))
    return best


def _sups(f, h, G):
    out = {}
    for n, s in all_slice_samples(f, h, G).items():
        out[(n, 0)] = refined_sup(s)
        out[(n, 1)] = refined_sup(spectral_derivative(s))
    return out


def slice_sup(f, n, h, l, G):
    s = slice_samples(f, n, h, G)
    if l == 1:
        s = spectral_derivative(s)
    return refined_sup(s)


def seminorm(f: WeylElement, h: CircleDiffeo, k: int, l: int, tr: Truncation) -> float:
    if l not in (0, 1):
        raise ValueError("l must be 0 or 1")
    best = 0.0
    for n, s in all_slice_samples(f, h, tr.G).items():
        if l == 1:
            s = spectral_derivative(s)
        best = max(best, (abs(n) + 1) ** k * refined_sup(s))
    return best


@dataclass
class SeminormProfile:
    values: dict
    element: WeylElement
    conjugator: CircleDiffeo = field(repr=False)

    def rows(self):
        return [(k, l, v) for (k, l), v in sorted(self.values.items())]


def profile(f: WeylElement, h: CircleDiffeo, kmax: int, tr: Truncation) -> SeminormProfile:
    sups = _sups(f, h, tr.G)
    vals = {}
    for k in range(kmax + 1):
        for l in (0, 1):
            vals[(k, l)] = max((((abs(n) + 1) ** k) * sups[(n, l)] for n in f.n_support), default=0.0)
    return SeminormProfile(vals, f, h)


def truncate_shift_support(f: WeylElement, N: int) -> WeylElement:
    return WeylElement({k: v for k, v in f.terms.items() if abs(k[1]) <= N}, f.alpha)


def density_check(f: WeylElement, h: CircleDiffeo, k: int, l: int, N: int, tr: Truncation):
    """(rho_{k,l}(f - f_N), rho_{k+1,l}(f)/(N+1), holds)."""
    lhs = seminorm(f - truncate_shift_support(f, N), h, k, l, tr)
    rhs = seminorm(f, h, k + 1, l, tr) / (N + 1)
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-12) + 1e-15)


def smooth_class_element(H: dict, h: CircleDiffeo, alpha, bandwidth: int = 32, G: int = cd.DEFAULT_GRID, tol: float = 1e-14):
    """Element with slices f^(n) = H_n o h o R^n, Fourier-truncated to |m| <= bandwidth.

    H maps n to a dict m -> coefficient of the trigonometric polynomial H_n.
    """
    a = float(as_alpha(alpha))
    x = np.arange(G) / G
    terms = {}
    for n, coef in H.items():
        y = h(x + n * a)
        vals = sum(v * np.exp(2j * np.pi * m * y) for m, v in coef.items())
        c = np.fft.fft(vals) / G
        for m in range(-bandwidth, bandwidth + 1):
            v = c[m % G]
            if abs(v) > tol:
                terms[(m, n)] = v
    return WeylElement(terms, alpha)


def random_smooth_element(rng, h: CircleDiffeo, alpha, n_range: int = 3, m_range: int = 3, bandwidth: int = 32, G: int = cd.DEFAULT_GRID, decay: float = 1.0):
    H = {}
    for n in range(-n_range, n_range + 1):
        if rng.random() < 0.3 and n != 0:
            continue
        scale = math.exp(-decay * abs(n))
        H[n] = {m: scale * complex(rng.normal(), rng.normal()) / (1 + abs(m)) ** 2 for m in range(-m_range, m_range + 1)}
    return smooth_class_element(H, h, alpha, bandwidth, G)


def product_ratio(f, g, h, k, l, tr):
    kk = max(k, 2)
    num = seminorm(twisted_convolution(f, g), h, k, l, tr)
    if l == 0:
        den = seminorm(f, h, kk, 0, tr) * seminorm(g, h, kk, 0, tr)
    else:
        den = seminorm(f, h, kk, 1, tr) * seminorm(g, h, kk, 0, tr) + seminorm(f, h, kk + 2, 0, tr) * seminorm(g, h, kk, 1, tr)
    return num / den if den > 0 else 0.0


def product_inequality_probe(h: CircleDiffeo, alpha, k: int, samples: int, tr: Truncation, seed: int = 0, l: int = 0, support: int = 2):
    """Empirical lower bound for B(k) and a no-growth verdict under support doubling.

    Ratios rho_{k,l}(f * g) / (product of the larger-weight seminorms) are
    sampled at shift-support ranges s and 2s; PASS if the doubled-scale max
    stays within a factor 2 of the base-scale max.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for s in (support, 2 * support):
        r = []
        for _ in range(samples):
            f = random_smooth_element(rng, h, alpha, n_range=s, m_range=2, bandwidth=24, G=tr.G, decay=0.3)
            g = random_smooth_element(rng, h, alpha, n_range=s, m_range=2, bandwidth=24, G=tr.G, decay=0.3)
            r.append(product_ratio(f, g, h, k, l, tr))
        out[s] = max(r)
    base, dbl = out[support], out[2 * support]
    return {"max_ratio": max(base, dbl), "base_max": base, "doubled_max": dbl,
            "verdict": "PASS" if dbl <= 2 * base else "FAIL", "seed": seed, "samples": samples}


def _abs_series(coeffs, x, deriv=False):
    if deriv:
        return sum(r * abs(c) * x ** (r - 1) for r, c in enumerate(coeffs) if r >= 1)
    return sum(abs(c) * x ** r for r, c in enumerate(coeffs))


def entire_calculus_seminorms(f: WeylElement, series_coeffs, h: CircleDiffeo, k: int, l: int, terms: int, tr: Truncation, B: float = 1.0):
    """rho_{k,l} of sum_{r <= terms} F_r f^{*r} against the functional-calculus majorant.

    Majorants: |F|(B rho_{k v 2,0}(f)) / B for l = 0 and
    rho_{k v 2,1}(f) |F|'(B (rho_{k v 2,0}(f) v rho_{k v 2 + 2,0}(f))) for l = 1.
    """
    coeffs = list(series_coeffs)[: terms + 1]
    power = WeylElement.unit(f.alpha)
    total = power.scale(coeffs[0]) if coeffs else WeylElement({}, f.alpha)
    partial = [seminorm(total, h, k, l, tr)]
    for r in range(1, len(coeffs)):
        power = twisted_convolution(power, f)
        total = total + power.scale(coeffs[r])
        partial.append(seminorm(total, h, k, l, tr))
    kk = max(k, 2)
    if l == 0:
        majorant = _abs_series(coeffs, B * seminorm(f, h, kk, 0, tr)) / B
    else:
        arg = B * max(seminorm(f, h, kk, 0, tr), seminorm(f, h, kk + 2, 0, tr))
        majorant = seminorm(f, h, kk, 1, tr) * _abs_series(coeffs, arg, deriv=True)
    if max(partial) > 10 * majorant and majorant > 0:
        raise MajorantExceeded(f"partial sums reach {max(partial):.3e} against majorant {majorant:.3e}")
    return {"value": partial[-1], "partial": partial, "majorant": majorant, "B": B}


def lattice_sums(N: int):
    """Partial sums over |n| <= N of 1/(1+|n|)^2 and |n|/(1+|n|)^3 with tail bounds.

    Both tails are at most 2 * int_N^inf dx/(1+x)^2 = 2/(N+1).
    """
    n = np.arange(1, N + 1)
    s1 = 1.0 + 2.0 * math.fsum(1.0 / (1.0 + n) ** 2)
    s2 = 2.0 * math.fsum(n / (1.0 + n) ** 3)
    tail = 2.0 / (N + 1)
    return {"s1": s1, "s1_tail": tail, "s2": s2, "s2_tail": tail}


def commutator_bound_check(f: WeylElement, md: ModularData, gamma, tr: Truncation, tol: float = 1e-6, exact: bool = False):
    """||D^sigma_L(pi(f))|| (modified L) against the seminorm bound.

    The inequality is certified with the Schur-test upper bound of the
    commutator norm; the exact norm is computed only when that bound is
    inconclusive or exact=True.
    """
    A = represent(f, md, tr)
    blocks = dirac_deformed(tr, md, True, gamma)
    X, Y = commutator_parts(A, blocks, md, tr)
    upper = max(X.norm_upper(), Y.norm_upper())
    ls = lattice_sums(tr.N)
    r21 = seminorm(f, md.h_conj, 2, 1, tr)
    r30 = seminorm(f, md.h_conj, 3, 0, tr)
    rhs = (ls["s1"] + ls["s1_tail"]) * r21 + gamma.gamma(1) * (ls["s2"] + ls["s2_tail"]) * r30
    lhs = None
    if exact or upper > rhs + tol:
        lhs = max(X.norm(), Y.norm())
        ok = lhs <= rhs + tol
    else:
        ok = True
    return {"pass": bool(ok), "lhs": lhs, "lhs_upper": upper, "rhs": rhs, "rho21": r21, "rho30": r30}


def star_symmetry(f, h, k, l, tr):
    """|rho_{k,l}(f) - rho_{k,l}(star f)|.

    psi_n(star f) = conj(psi_{-n}(f) o T^(-2n)), so this vanishes for l = 0 and
    for rotations; for l = 1 the derivative picks up the factor D T^(-2n).
    """
    return abs(seminorm(f, h, k, l, tr) - seminorm(star(f), h, k, l, tr))
