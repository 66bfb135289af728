"""Staged conjugation builds f_k = H_k R_{alpha_{k+1}} H_k^{-1}.

Each stage k picks a rational approximant alpha_k = p_k/q_k of alpha and a
perturbation h_k whose periodic part has period 1/q_k, so that h_k commutes
with R_{alpha_k}.  Stages are accepted only when the contraction inequality

    2 * C1 * norm2(H_k)^2 * |alpha - alpha_k| <= 2^-k

is certified in exact rational arithmetic.  norm2 is the surrogate
max_{j=1,2} (||D^j H|| v ||D^j H^{-1}||) and C1 a configurable constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import circle as cd
from .circle import CircleDiffeo, GrowthTable, MonotonicityError
from .liouville import ExactBound, Log2Bound, LiouvilleApprox, TowerBound, parse_alpha, ul_holds

DEFAULT_STAGES = 6
NORM_OVERSAMPLE = 4
NORM_MARGIN = 1e-6


class ContractionError(ValueError):
    """A stage violates the contraction (or o(log n)) gating inequality."""


def make_commuting_h(q: int, amplitude: float, frequency_multiplier: int = 1, grid: int = cd.DEFAULT_GRID) -> CircleDiffeo:
    """x + amplitude / (2 pi f q) * sin(2 pi f q x); sup |Dh - 1| = |amplitude|."""
    q = int(q)
    f = int(frequency_multiplier)
    if q < 1 or f < 1:
        raise ValueError("q and frequency_multiplier must be positive")
    if abs(amplitude) >= 1:
        raise MonotonicityError(f"amplitude {amplitude} makes h non-monotone (need |amplitude| < 1)")
    k = f * q
    if k >= grid // 2:
        raise ValueError(f"frequency {k} not resolvable on a {grid}-point grid")
    if amplitude == 0:
        return cd.identity(grid)
    c = np.zeros(k, dtype=complex)
    c[k - 1] = -1j * amplitude / (2 * math.pi * k)
    return CircleDiffeo(0.0, c, grid)


def _sup(f: CircleDiffeo, order):
    vals = cd._grid_series(f.coeffs, f.grid * NORM_OVERSAMPLE, order)
    if order == 1:
        vals = 1.0 + vals
    return float(np.abs(vals).max())


def norm2(H: CircleDiffeo) -> float:
    """max over j in {1, 2} of ||D^j H|| v ||D^j H^{-1}|| (oversampled grid sup)."""
    Hi = cd.inverse(H)
    return max(_sup(H, 1), _sup(H, 2), _sup(Hi, 1), _sup(Hi, 2))


def lipschitz_ratio(H: CircleDiffeo) -> float:
    """||D^2 H|| * ||D H^{-1}|| / norm2(H)^2.

    d1(H R_a H^-1, H R_b H^-1) <= ||D^2 H|| ||D H^-1|| |a - b|, so any C1 at
    least this ratio makes the contraction bound valid for this H.
    """
    Hi = cd.inverse(H)
    n2 = norm2(H)
    return _sup(H, 2) * _sup(Hi, 1) / n2 ** 2


def d1_distance(f: CircleDiffeo, g: CircleDiffeo) -> float:
    """max(||Df - Dg||, ||Df^-1 - Dg^-1||) on the common grid."""
    G = min(f.grid, g.grid)
    x = np.arange(G) / G
    a = np.abs(f.deriv(x) - g.deriv(x)).max() if (f.grid != G or g.grid != G) else np.abs(f.deriv_grid() - g.deriv_grid()).max()
    fi, gi = cd.inverse(f), cd.inverse(g)
    b = np.abs(fi.deriv(x) - gi.deriv(x)).max()
    return float(max(a, b))


def d1_iterates(f: CircleDiffeo, g: CircleDiffeo, nmax: int) -> np.ndarray:
    """d1(f^n, g^n) for n = 1..nmax from chain-rule tables (equal for -n)."""
    G = min(f.grid, g.grid)
    x = np.arange(G) / G
    ff, fb = cd.iterate_derivatives(f, nmax, x)
    gf, gb = cd.iterate_derivatives(g, nmax, x)
    return np.maximum(np.abs(ff - gf).max(axis=1), np.abs(fb - gb).max(axis=1))


def _fraction_of(x: float) -> Fraction:
    return Fraction(x)


def bound_at_most(bound, target: Fraction):
    """Certify |alpha - p/q| <= target given a stored error bound."""
    if target <= 0:
        return False
    if isinstance(bound, ExactBound):
        return bound.upper <= target
    need = math.ceil(1 / target).bit_length()
    if isinstance(bound, Log2Bound):
        return need <= bound.neg_log2
    if isinstance(bound, TowerBound):
        return bound.level > need.bit_length()
    raise TypeError(f"unknown bound type {type(bound).__name__}")


def bound_slack(bound, target: Fraction):
    """target - upper bound, when the bound is an exact rational; else None."""
    if isinstance(bound, ExactBound):
        return target - bound.upper
    return None


@dataclass
class AFKStage:
    k: int
    approx_index: int
    alpha_k: Fraction
    q: int
    amplitude: float
    freq_mult: int
    h: CircleDiffeo
    H: CircleDiffeo
    norm2: float
    lipschitz: float
    slack: Fraction | None
    gate_ok: bool
    size: float | None = None  # o(log n) surrogate C(k,2)^2 q^(2N(k,2))
    m_k: float | None = None
    ul_ok: bool | None = None

    def report(self):
        return {
            "k": self.k,
            "approx_index": self.approx_index,
            "alpha_k": str(self.alpha_k),
            "q": self.q,
            "amplitude": self.amplitude,
            "freq_mult": self.freq_mult,
            "norm2": self.norm2,
            "lipschitz_ratio": self.lipschitz,
            "contraction_slack": None if self.slack is None else float(self.slack),
            "contraction_slack_exact": None if self.slack is None else str(self.slack),
            "gate_ok": self.gate_ok,
            "surrogate_size": self.size,
            "m_k": self.m_k,
            "ul_gate_ok": self.ul_ok,
        }


@dataclass
class AFKBuild:
    alpha: LiouvilleApprox
    stages: list
    f_cache: list  # f_0 .. f_K
    rotations: list  # alpha_1 .. alpha_{K+1} as floats
    mode: str
    C1: float
    final_index: int
    m_sequence: list = field(default_factory=list)

    @property
    def f(self) -> CircleDiffeo:
        return self.f_cache[-1]

    @property
    def H(self) -> CircleDiffeo:
        return self.stages[-1].H if self.stages else cd.identity(self.f.grid)

    @property
    def K(self):
        return len(self.stages)

    @property
    def rotation_final(self) -> float:
        return self.rotations[-1]

    def consumed(self):
        return [s.approx_index for s in self.stages] + [self.final_index]

    def k_of(self, n):
        return k_sequence(self.m_sequence, n)

    def report(self):
        return {
            "alpha": self.alpha.label,
            "mode": self.mode,
            "C1": self.C1,
            "K": self.K,
            "consumed_approximants": self.consumed(),
            "final_rotation": self.rotation_final,
            "stages": [s.report() for s in self.stages],
            "m_sequence": self.m_sequence,
            "conjugacy_steps": conjugacy_steps(self),
        }


def _as_list(v, K, name):
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return [float(v)] * K
    v = [float(t) for t in v]
    if len(v) != K:
        raise ValueError(f"{name} needs one value per stage")
    return v


def build(alpha, stage_params, mode: str = "o_n", C1: float = 1.0, grid: int = cd.DEFAULT_GRID,
          C_k2=None, N_k2: int = 1) -> AFKBuild:
    """Assemble the staged construction, certifying every gate.

    stage_params: list of {"q", "amplitude", "freq_mult"}.  Stage k uses the
    first unused approximant of alpha with denominator q; the approximant after
    the last stage supplies the final rotation alpha_{K+1}.
    """
    if not isinstance(alpha, LiouvilleApprox):
        alpha = parse_alpha(alpha)
    if mode not in ("o_n", "o_log_n"):
        raise ValueError("mode must be 'o_n' or 'o_log_n'")
    K = len(stage_params)
    C1f = Fraction(C1)
    ck2 = _as_list(C_k2, K, "C_k2")
    if mode == "o_log_n" and ck2 is None:
        raise ValueError("o_log_n mode needs surrogate constants C_k2")
    H = cd.identity(grid)
    stages = []
    prev = -1
    m_seq = []
    for k, sp in enumerate(stage_params, 1):
        q = int(sp["q"])
        amp = float(sp.get("amplitude", 0.0))
        fm = int(sp.get("freq_mult", 1))
        idx = alpha.find_denominator(q, prev + 1)
        if idx is None:
            raise ContractionError(f"stage {k}: no unused approximant with denominator {q}")
        ap = alpha[idx]
        h = make_commuting_h(q, amp, fm, grid)
        H = cd.compose(H, h) if amp else H
        n2 = norm2(H) * (1 + NORM_MARGIN)
        lip = lipschitz_ratio(H)
        if lip > C1 * (1 + 1e-12):
            raise ContractionError(f"stage {k}: C1 = {C1} is below the Lipschitz ratio {lip:.6g} of H_{k}")
        coef = 2 * C1f * _fraction_of(n2) ** 2
        target = Fraction(1, 2 ** k) / coef
        ok = bound_at_most(ap.bound, target)
        slack = bound_slack(ap.bound, target)
        if slack is not None:
            slack = slack * coef
        stage = AFKStage(k, idx, ap.fraction, q, amp, fm, h, H, n2, lip, slack, ok)
        if not ok:
            raise ContractionError(
                f"stage {k}: 2*C1*norm2^2*|alpha - {ap}| <= 2^-{k} fails"
                + (f" (exact slack {slack})" if slack is not None else "")
            )
        if mode == "o_log_n":
            c = ck2[k - 1]
            size = c * c * float(q) ** (2 * N_k2)
            if n2 ** 2 > size:
                raise ContractionError(f"stage {k}: surrogate C(k,2)^2 q^(2N) = {size:.6g} is below norm2^2 = {n2 ** 2:.6g}")
            m_k = math.exp(size * size) if size * size < 700 else math.inf
            if m_seq and not m_k > m_seq[-1]:
                raise ContractionError(f"stage {k}: m-sequence must be strictly increasing")
            # eps / (q^N e^{(C q^N)^2}) <= 1 / (2^{k+1} m_k C1 norm2^2) for these choices
            eps = Fraction(1, 2 ** (k + 1)) / (C1f * Fraction(c * c))
            res, _ = ul_holds(ap, 2 * N_k2, Fraction(c * c), eps)
            if not res:
                raise ContractionError(f"stage {k}: approximant {ap} fails the ultra-Liouville gate")
            stage.size, stage.m_k, stage.ul_ok = size, m_k, True
            m_seq.append(m_k)
        stages.append(stage)
        prev = idx
    final = prev + 1
    if final >= len(alpha):
        raise ContractionError("alpha has no approximant left for the final rotation")

    def rot(i):
        a = alpha[i]
        return float(a.fraction) if a.fraction is not None else alpha.float_value

    rotations = [rot(s.approx_index) for s in stages] + [rot(final)]
    if not stages:
        rotations = [rot(0)]
        final = 0
    f_cache = [cd.rotation(rotations[0], grid)]
    for j, s in enumerate(stages):
        f_cache.append(cd.conjugate_rotation(s.H, rotations[j + 1]) if not s.H.is_rotation() else cd.rotation(rotations[j + 1], grid))
    return AFKBuild(alpha, stages, f_cache, rotations, mode, float(C1), final, m_seq)


def build_from_config(cfg: dict, alpha=None) -> AFKBuild:
    alpha = alpha if alpha is not None else parse_alpha(cfg.get("alpha", "tower:2"))
    return build(
        alpha,
        cfg.get("stages", []),
        cfg.get("mode", "o_n"),
        cfg.get("C1", 1.0),
        int(cfg.get("grid", cd.DEFAULT_GRID)),
        cfg.get("C_k2"),
        int(cfg.get("N_k2", 1)),
    )


def k_sequence(m_sequence, n) -> int:
    """k_n = 1 for |n| < m_2, else the largest k with m_k < |n| (indices from 1)."""
    n = abs(int(n))
    if len(m_sequence) < 2 or n < m_sequence[1]:
        return 1
    k = 1
    for j, m in enumerate(m_sequence, 1):
        if m < n:
            k = j
    return k


def conjugacy_steps(b: AFKBuild) -> list:
    """sup |H_k - H_{k-1}| on the grid for k = 1..K (H_0 = id), a finite-K proxy for convergence of H_k."""
    out = []
    prev = cd.identity(b.f.grid)
    for s in b.stages:
        x = s.H.points()
        d = (s.H(x) - prev(x) + 0.5) % 1.0 - 0.5
        out.append(float(np.abs(d).max()))
        prev = s.H
    return out


def contraction_table(b: AFKBuild, nmax: int = 64) -> np.ndarray:
    """rows k = 1..K: d1(f_k^n, f_{k-1}^n) for n = 1..nmax."""
    return np.array([d1_iterates(b.f_cache[k], b.f_cache[k - 1], nmax) for k in range(1, b.K + 1)])


def contraction_check(b: AFKBuild, nmax: int = 64, tol: float = 1e-10):
    tab = contraction_table(b, nmax)
    n = np.arange(1, nmax + 1)
    bounds = np.array([n / 2.0 ** k for k in range(1, b.K + 1)])
    return bool(np.all(tab <= bounds + tol)), tab, bounds


def reconstruction_residual(b: AFKBuild, k: int) -> float:
    """sup |f_k(x) - H_k(H_k^{-1}(x) + alpha_{k+1})| on the grid."""
    f = b.f_cache[k]
    x = f.points()
    if k == 0:
        exact = x + b.rotations[0]
    else:
        H = b.stages[k - 1].H
        exact = H(cd.invert_points(H, x) + b.rotations[k])
    diff = f(x) - exact
    diff = (diff + 0.5) % 1.0 - 0.5
    return float(np.abs(diff).max())


@dataclass
class FitReport:
    mode: str
    ratios: np.ndarray
    max_ratio: float
    windows: list
    window_max: list
    monotone: bool
    verdict: str

    def to_dict(self):
        return {
            "mode": self.mode,
            "max_ratio": self.max_ratio,
            "windows": self.windows,
            "window_max": self.window_max,
            "monotone": self.monotone,
            "verdict": self.verdict,
        }


def dyadic_windows(lo: int, hi: int):
    out = []
    a = lo
    while a <= hi:
        b = min(2 * a - 1, hi)
        out.append((a, b))
        a *= 2
    return out


def growth_asymptotics_fit(table: GrowthTable, mode: str = "o_n") -> FitReport:
    """Ratios Gamma_n/n or Gamma_n/ln n and their decay over dyadic windows."""
    if table.nmax < 64:
        raise ValueError("need nmax >= 64")
    n = np.arange(1, table.nmax + 1)
    if mode == "o_n":
        ratios = table.values / n
        lo = 1
    elif mode == "o_log_n":
        ratios = np.full(table.nmax, np.nan)
        ratios[1:] = table.values[1:] / np.log(n[1:])
        lo = 2
    else:
        raise ValueError("mode must be 'o_n' or 'o_log_n'")
    wins = dyadic_windows(lo, table.nmax)
    wmax = [float(np.nanmax(ratios[a - 1 : b])) for a, b in wins]
    mono = all(y <= x for x, y in zip(wmax, wmax[1:]))
    verdict = "PASS" if wmax[-1] < wmax[0] else "FAIL"
    return FitReport(mode, ratios, float(np.nanmax(ratios)), wins, wmax, mono, verdict)


def telescoping_check(b: AFKBuild, k: int, nmax: int = 64):
    """(lhs, rhs): ||Df^n - Df_k^n|| against sum_{l>k} d1(f_l^n, f_{l-1}^n), n = 1..nmax."""
    x = b.f.points()
    ff, fb = cd.iterate_derivatives(b.f, nmax, x)
    kf, kb = cd.iterate_derivatives(b.f_cache[k], nmax, x)
    lhs = np.abs(ff - kf).max(axis=1)
    rhs = np.zeros(nmax)
    for l in range(k + 1, b.K + 1):
        rhs += d1_iterates(b.f_cache[l], b.f_cache[l - 1], nmax)
    return lhs, rhs


def log_growth_check(b: AFKBuild, nmax: int = 256):
    """||Df^n|| against sqrt(ln |n|) + 1 for m_2 <= |n| <= nmax (forward and backward)."""
    if b.mode != "o_log_n" or len(b.m_sequence) < 2:
        raise ValueError("needs an o_log_n build with at least two stages")
    m2 = b.m_sequence[1]
    lo = max(2, int(math.ceil(m2)))
    if lo > nmax:
        return True, lo, np.zeros(0), np.zeros(0)
    fwd, bwd = cd.iterate_derivatives(b.f, nmax)
    n = np.arange(lo, nmax + 1)
    norms = np.maximum(fwd[lo - 1 :].max(axis=1), bwd[lo - 1 :].max(axis=1))
    bound = np.sqrt(np.log(n)) + 1
    return bool(np.all(norms <= bound)), lo, norms, bound


# Ready-made stage configurations.

PRESETS = {
    # six stages, o(n) mode, default surrogate constant C1 = 1
    "o_n": {
        "alpha": "lacunary:2,6,7,8,9,10,40",
        "mode": "o_n",
        "C1": 1.0,
        "stages": [
            {"q": 4, "amplitude": 0.08, "freq_mult": 1},
            {"q": 64, "amplitude": 2e-4, "freq_mult": 1},
            {"q": 128, "amplitude": 1e-4, "freq_mult": 1},
            {"q": 256, "amplitude": 5e-5, "freq_mult": 1},
            {"q": 512, "amplitude": 2e-5, "freq_mult": 1},
            {"q": 1024, "amplitude": 1e-5, "freq_mult": 1},
        ],
    },
    # two stages gated by the ultra-Liouville test; m_2 = exp(S_2^2) stays below 256
    "o_log_n": {
        "alpha": "lacunary:2,5,30",
        "mode": "o_log_n",
        "C1": 1.0,
        "N_k2": 1,
        "C_k2": [0.26, 0.044],
        "stages": [
            {"q": 4, "amplitude": 0.03, "freq_mult": 1},
            {"q": 32, "amplitude": 0.001, "freq_mult": 1},
        ],
    },
    # one strong stage over R_0; the final rotation 1/128 gives large distortion for |n| near 64
    "growth": {
        "alpha": "lacunary:7,30,60",
        "mode": "o_n",
        "C1": 0.05,
        "stages": [{"q": 1, "amplitude": 0.6, "freq_mult": 1}],
    },
    # tower-power alpha: stages at q = 2 and q = 256, final rotation s_3
    "tower": {
        "alpha": "tower:3",
        "mode": "o_n",
        "C1": 1.0,
        "stages": [
            {"q": 2, "amplitude": 0.2, "freq_mult": 1},
            {"q": 256, "amplitude": 0.001, "freq_mult": 1},
        ],
    },
}
