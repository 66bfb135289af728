"""Dirac operators on the truncated GNS space.

Block n of the doubled space carries D_n = [[0, L_n], [L_n^*, 0]] where L_n is
diagonal in the Fourier basis, L_n e_m = (i m - a_n) e_m.  The standard
operator has a_n = n, the modified one a_n = sign(n) sum_{l=1}^{|n|} 1/Gamma_j
with j = l for n > 0 and j = l - 1 for n < 0 (Gamma_0 = 1).  The deformed
operators weight L by the compression W_n of 1/delta_n:

    D^sigma_n = [[0, W_n L_n], [L_n^* W_n, 0]].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circle import GrowthTable, invert_points
from .gns import BlockOperator, ModularData, Truncation, diagonal_operator, mult_matrix

PINV_THRESHOLD = 1e-12
BOUND_TOL = 1e-8


class BoundViolation(ArithmeticError):
    """A norm exceeds a bound that holds as a theorem; signals a build bug."""


def a_sequence(gamma: GrowthTable | None, N: int, modified: bool = False) -> np.ndarray:
    """a_n for n = -N..N (index n + N)."""
    n = np.arange(-N, N + 1)
    if not modified:
        return n.astype(float)
    if gamma is None or gamma.nmax < N:
        raise ValueError("modified Dirac operator needs a growth table with nmax >= N")
    g = gamma.as_array(with_zero=True)  # g[j] = Gamma_j, g[0] = 1
    out = np.zeros(2 * N + 1)
    for k in range(1, N + 1):
        out[N + k] = math.fsum(1.0 / g[1 : k + 1])
        out[N - k] = -math.fsum(1.0 / g[0:k])
    return out


@dataclass
class DiracBlock:
    n: int
    a_n: float
    matrix: np.ndarray
    deformed: bool
    L: np.ndarray  # diagonal of L_n
    weight: np.ndarray | None = None  # compression of 1/delta_n

    @property
    def dim(self):
        return self.L.size

    def closed_form_eigenvalues(self):
        r = np.abs(self.L)
        return np.sort(np.concatenate([-r, r]))

    def symmetry_residual(self):
        A = self.matrix
        nrm = np.linalg.norm(A, 2)
        return float(np.linalg.norm(A - A.conj().T, 2) / nrm) if nrm else 0.0


def _L_diag(tr: Truncation, a_n: float):
    return 1j * tr.modes - a_n


def _assemble(Ltop, Lbot):
    d = Ltop.shape[0]
    A = np.zeros((2 * d, 2 * d), dtype=complex)
    A[:d, d:] = Ltop
    A[d:, :d] = Lbot
    return A


def dirac_untwisted(tr: Truncation, modified: bool = False, gamma: GrowthTable | None = None):
    a = a_sequence(gamma, tr.N, modified)
    out = []
    for n in tr.blocks:
        L = _L_diag(tr, a[n + tr.N])
        out.append(DiracBlock(n, float(a[n + tr.N]), _assemble(np.diag(L), np.diag(L.conj())), False, L))
    return out


def dirac_deformed(tr: Truncation, md: ModularData, modified: bool = False, gamma: GrowthTable | None = None):
    a = a_sequence(gamma, tr.N, modified)
    out = []
    for n in tr.blocks:
        L = _L_diag(tr, a[n + tr.N])
        W = mult_matrix(1.0 / md.delta(n, tr.G), tr.M)
        A = _assemble(W * L[None, :], L.conj()[:, None] * W)
        out.append(DiracBlock(n, float(a[n + tr.N]), A, True, L, W))
    return out


def ek_factorization_residual(b: DiracBlock, md: ModularData, tr: Truncation) -> float:
    """||e^K D_n e^K - D^sigma_n|| with K = diag(-ln delta_n, 0) as a multiplication operator."""
    d = b.dim
    E = np.eye(2 * d, dtype=complex)
    E[:d, :d] = mult_matrix(np.exp(-np.log(md.delta(b.n, tr.G))), tr.M)
    D = _assemble(np.diag(b.L), np.diag(b.L.conj()))
    return float(np.linalg.norm(E @ D @ E - b.matrix, 2))


def _safe_recip(L):
    out = np.zeros_like(L)
    big = np.abs(L) > PINV_THRESHOLD
    out[big] = 1.0 / L[big]
    return out


def block_inverse(b: DiracBlock, md: ModularData | None = None, tr: Truncation | None = None):
    """Closed-form (pseudo-)inverse [[0, M_delta (L^*)^-1], [L^-1 M_delta, 0]] and its norm.

    At a kernel (|i m - a_n| below threshold) the inverse is taken on the
    orthogonal complement.
    """
    d = b.dim
    if b.deformed:
        Md = mult_matrix(md.delta(b.n, tr.G), tr.M)
    else:
        Md = np.eye(d, dtype=complex)
    ri = _safe_recip(b.L)
    top = Md * ri.conj()[None, :]
    bot = ri[:, None] * Md
    inv = _assemble(top, bot)
    nrm = max(np.linalg.norm(top, 2), np.linalg.norm(bot, 2))
    return inv, float(nrm)


def pinv_residual(b: DiracBlock, md: ModularData | None = None, tr: Truncation | None = None, interior: int | None = None):
    """max |closed form - pinv| over the modes |m| <= interior in both halves."""
    inv, _ = block_inverse(b, md, tr)
    P = np.linalg.pinv(b.matrix, rcond=PINV_THRESHOLD, hermitian=True)
    d = b.dim
    M = (d - 1) // 2
    k = M if interior is None else interior
    idx = np.r_[M - k : M + k + 1, d + M - k : d + M + k + 1]
    return float(np.abs((inv - P)[np.ix_(idx, idx)]).max())


def dyadic_decay(values: np.ndarray):
    """(window maxima, verdict) over dyadic windows of n = 1..len(values)."""
    wins = []
    a = 1
    while a <= values.size:
        b = min(2 * a - 1, values.size)
        wins.append(((a, b), float(values[a - 1 : b].max())))
        a *= 2
    verdict = "PASS" if len(wins) > 1 and wins[-1][1] < wins[0][1] else "FAIL"
    return wins, verdict


@dataclass
class ResolventReport:
    n: list
    norms: list
    bounds: list
    a: list
    zero_norm: float
    windows: list
    verdict: str
    violations: list
    modified: bool

    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "modified": self.modified,
            "rows": [{"n": n, "a_n": a, "norm": x, "bound": b} for n, a, x, b in zip(self.n, self.a, self.norms, self.bounds)],
            "zero_block_norm": self.zero_norm,
            "windows": [{"from": w[0][0], "to": w[0][1], "max": w[1]} for w in self.windows],
            "verdict": self.verdict,
            "violations": self.violations,
        }


def resolvent_report(blocks, md: ModularData, gamma: GrowthTable, tr: Truncation, modified: bool = False, strict: bool = True):
    """Inverse norms against Gamma_|n|(T^2)/|n| (or /|a_n| when modified)."""
    if gamma.nmax < tr.N:
        raise ValueError("growth table shorter than N")
    ns, norms, bounds, avals, viol = [], [], [], [], []
    zero = 0.0
    per_abs = np.zeros(tr.N)
    for b in blocks:
        _, nrm = block_inverse(b, md, tr)
        if b.n == 0:
            zero = nrm
            continue
        denom = abs(b.a_n) if modified else abs(b.n)
        bound = gamma.gamma(abs(b.n)) / denom
        ns.append(b.n)
        norms.append(nrm)
        bounds.append(bound)
        avals.append(b.a_n)
        per_abs[abs(b.n) - 1] = max(per_abs[abs(b.n) - 1], nrm)
        if nrm > bound + BOUND_TOL:
            viol.append({"n": b.n, "norm": nrm, "bound": bound})
    wins, verdict = dyadic_decay(per_abs)
    rep = ResolventReport(ns, norms, bounds, avals, zero, wins, verdict, viol, modified)
    if strict and viol:
        raise BoundViolation(f"resolvent bound violated at blocks {[v['n'] for v in viol]}")
    return rep


def _weights(md, tr, blocks=None):
    if blocks is not None and all(b.weight is not None for b in blocks):
        return {b.n: b.weight for b in blocks}
    return {n: mult_matrix(1.0 / md.delta(n, tr.G), tr.M) for n in tr.blocks}


def commutator_parts(A: BlockOperator, blocks, md: ModularData, tr: Truncation):
    """(Delta^-1 [L, A], [L^*, A] Delta^-1) as block operators."""
    L = {b.n: b.L for b in blocks}
    W = _weights(md, tr, blocks)
    X, Y = {}, {}
    for (r, c), B in A.blocks.items():
        cL = L[r][:, None] * B - B * L[c][None, :]
        cLs = L[r].conj()[:, None] * B - B * L[c].conj()[None, :]
        X[(r, c)] = W[r] @ cL
        Y[(r, c)] = cLs @ W[c]
    return BlockOperator(tr.N, tr.dim, X), BlockOperator(tr.N, tr.dim, Y)


def deformed_commutator(A: BlockOperator, blocks, md: ModularData, tr: Truncation):
    """i [[0, Delta^-1 [L, A]], [[L^*, A] Delta^-1, 0]] and its norm."""
    X, Y = commutator_parts(A, blocks, md, tr)
    d = tr.dim
    out = {}
    for k in set(X.blocks) | set(Y.blocks):
        B = np.zeros((2 * d, 2 * d), dtype=complex)
        B[:d, d:] = 1j * X.block(*k)
        B[d:, :d] = 1j * Y.block(*k)
        out[k] = B
    return BlockOperator(tr.N, 2 * d, out), max(X.norm(), Y.norm())


def weighted_shift_norm(md: ModularData, tr: Truncation, modified: bool = False, gamma: GrowthTable | None = None):
    """||Delta^-1 [L, lambda]||, the upper part of the deformed commutator of the shift."""
    a = a_sequence(gamma, tr.N, modified)
    worst = 0.0
    for n in range(-tr.N + 1, tr.N + 1):
        coef = a[n - 1 + tr.N] - a[n + tr.N]
        W = mult_matrix(1.0 / md.delta(n, tr.G), tr.M)
        worst = max(worst, abs(coef) * float(np.linalg.norm(W, 2)))
    return worst


def commutator_multiplication_part(F, md: ModularData, tr: Truncation, refine: bool = True):
    """Samples of |T^2n(z) DF(T^2n(z))| for |n| <= N, with the sup over n and sup |z DF|.

    F is a dict m -> coefficient (F(z) = sum c_m z^m) or a pair of grid
    samples (F, z dF/dz).
    """
    if isinstance(F, dict):
        def zdF(x):
            x = np.asarray(x, dtype=float)
            return sum(m * v * np.exp(2j * np.pi * m * x) for m, v in F.items()) + 0 * x
    else:
        vals, dvals = (np.asarray(v, dtype=complex) for v in F)
        c = np.fft.fft(dvals) / dvals.size
        k = np.fft.fftfreq(dvals.size, 1.0 / dvals.size)

        def zdF(x):
            x = np.asarray(x, dtype=float)
            return np.exp(2j * np.pi * np.outer(x, k)) @ c

    G = tr.G
    x = np.arange(G) / G
    base = np.abs(zdF(x))
    sup_df = _refined_sup(zdF, base, G) if refine else float(base.max())
    family = {}
    sup_n = 0.0
    for n in tr.blocks:
        pts = np.mod(md.T_power_points(2 * n, G), 1.0)
        vals = np.abs(zdF(pts))
        family[n] = vals
        s = float(vals.max())
        if refine:
            def comp(y, n=n):
                y = np.mod(np.asarray(y, dtype=float), 1.0)
                if md.is_rotation:
                    return zdF(y + 2 * n * md.alpha)
                return zdF(md.h_conj(invert_points(md.h_conj, y) + 2 * n * md.alpha))
            s = _refined_sup(comp, vals, G)
        sup_n = max(sup_n, s)
    return family, sup_n, sup_df


def _refined_sup(fn, samples, G, width=64):
    i = int(np.argmax(samples))
    xs = (i + np.linspace(-1.0, 1.0, 2 * width + 1)) / G
    return float(max(samples.max(), np.abs(fn(xs)).max()))


def spectrum_rows(blocks):
    """(n, m_index, closed-form eigenvalue, numerical eigenvalue) rows."""
    rows = []
    for b in blocks:
        num = np.linalg.eigvalsh(b.matrix)
        cf = b.closed_form_eigenvalues()
        for j, (x, y) in enumerate(zip(cf, num)):
            rows.append((b.n, j, float(x), float(y)))
    return rows
