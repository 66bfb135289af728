"""Rational approximants of Liouville-type numbers with certified error bounds.

Every inequality is decided either in exact rational arithmetic or with
outward-rounded interval arithmetic whose working precision is doubled until
the comparison is decisive.  Terms too large to materialise (the third tower
power has ~10^77 binary digits) are carried through their base-2 logarithms.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath.ctx_iv import MPIntervalContext

DEFAULT_PRECISION = 256
MAX_PRECISION = 1 << 15
TOWER_MAX_K = 3


class InsufficientApproximants(ValueError):
    pass


def default_precision():
    return int(os.environ.get("NCT_PRECISION_BITS", DEFAULT_PRECISION))


def _ctx(prec):
    c = MPIntervalContext()
    c.prec = int(prec)
    return c


def _tuple_fraction(t):
    sign, man, exp, _ = t
    v = Fraction(int(man)) * (Fraction(2) ** exp)
    return -v if sign else v


def _iv_bounds(x):
    a, b = x._mpi_
    return _tuple_fraction(a), _tuple_fraction(b)


def _iv_frac(ctx, r: Fraction):
    return ctx.mpf(r.numerator) / ctx.mpf(r.denominator)


# Error bounds.  Each answers "is -log2|alpha - p/q| certainly larger than Y?"
# for an interval Y, returning True, False (certainly not from this bound) or
# None (undecided at this precision).


@dataclass(frozen=True)
class ExactBound:
    """|alpha - p/q| <= upper, and >= lower, as exact rationals."""

    upper: Fraction
    lower: Fraction = Fraction(0)

    def neglog2_exceeds(self, ctx, Y):
        if self.upper <= 0:
            return True
        lhs = -ctx.log(_iv_frac(ctx, self.upper)) / ctx.log(2)
        if lhs.a > Y.b:
            return True
        if self.lower > 0:
            lo = -ctx.log(_iv_frac(ctx, self.lower)) / ctx.log(2)
            if lo.b <= Y.a:
                return False
        return None

    def describe(self):
        return str(self.upper)


@dataclass(frozen=True)
class Log2Bound:
    """|alpha - p/q| <= 2**(-neg_log2), with neg_log2 an exact integer."""

    neg_log2: int

    def neglog2_exceeds(self, ctx, Y):
        X = ctx.mpf(self.neg_log2)
        if X.a > Y.b:
            return True
        return None

    def describe(self):
        return f"2^-{self.neg_log2}"


@dataclass(frozen=True)
class TowerBound:
    """|alpha - p/q| <= 2**(-2**(2**level)); only the exponent `level` is stored."""

    level: int

    def neglog2_exceeds(self, ctx, Y):
        # 2**(2**level) > Y  <=  level > log2 log2 Y
        if Y.b <= 1:
            return True
        ll = ctx.log(ctx.log(Y) / ctx.log(2)) / ctx.log(2) if Y.b > 2 else ctx.mpf(0)
        if ctx.mpf(self.level).a > ll.b:
            return True
        return None

    def describe(self):
        return f"2^-(2^(2^{self.level}))"


@dataclass(frozen=True)
class Approximant:
    """A reduced fraction p/q, or a symbolic one with q = 2**log2_q."""

    p: int | None
    q: int | None
    bound: object
    log2_q: int | None = None
    label: str = ""

    @property
    def fraction(self):
        return Fraction(self.p, self.q) if self.q is not None else None

    def log2q_iv(self, ctx):
        if self.q is not None:
            return ctx.log(ctx.mpf(self.q)) / ctx.log(2)
        return ctx.mpf(self.log2_q)

    def q_iv(self, ctx):
        return ctx.mpf(self.q) if self.q is not None else ctx.mpf(2) ** self.log2_q

    def __str__(self):
        if self.q is not None:
            return f"{self.p}/{self.q}"
        return f"{self.label}(q=2^{self.log2_q})"


@dataclass
class LiouvilleApprox:
    approximants: list
    value: object  # mpmath interval enclosing alpha
    precision_bits: int = DEFAULT_PRECISION
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        qs = [a.q for a in self.approximants if a.q is not None]
        for a in self.approximants:
            if a.q is not None and math.gcd(a.p, a.q) != 1:
                raise ValueError(f"approximant {a} is not reduced")
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("denominators must be strictly increasing")

    @property
    def error_bounds(self):
        return [a.bound for a in self.approximants]

    def __len__(self):
        return len(self.approximants)

    def __getitem__(self, k):
        return self.approximants[k]

    @property
    def float_value(self):
        return float(mpmath.mpf(self.value.mid._mpi_[0])) if hasattr(self.value, "mid") else float(self.value)

    def find_denominator(self, q, start=0):
        for i in range(start, len(self.approximants)):
            if self.approximants[i].q == q:
                return i
        return None


# constructors


def tower_q_log2(n):
    """log2 of the n-th tower power: q_1 = 2, q_n = (2^n)^(2^(q_{n-1}))."""
    if n == 1:
        return 1
    prev = tower_q(n - 1)
    return n * (1 << prev)


def tower_q(n):
    if n > 2:
        raise OverflowError(f"tower power q_{n} is too large to materialise")
    return 1 << tower_q_log2(n)


def tower_liouville(K: int = 2, precision_bits: int | None = None) -> LiouvilleApprox:
    """Partial sums s_1..s_K of alpha = sum 1/q_n for the tower powers q_n."""
    if precision_bits is None:
        precision_bits = default_precision()
    if not 1 <= K <= TOWER_MAX_K:
        raise OverflowError(f"tower_liouville supports 1 <= K <= {TOWER_MAX_K}")
    approx = []
    s = Fraction(0)
    for n in range(1, K + 1):
        if n <= 2:
            s += Fraction(1, tower_q(n))
            # tail sum_{j>n} 1/q_j <= 2/q_{n+1}
            if n == 1:
                bound = ExactBound(Fraction(2, tower_q(2)), Fraction(1, tower_q(2)))
            else:
                bound = Log2Bound(tower_q_log2(3) - 1)
            approx.append(Approximant(s.numerator, s.denominator, bound, label=f"s_{n}"))
        else:
            # s_3 has denominator q_3 = 2**(3 * 2**256); its error is below 2**(-2**q_3)
            approx.append(Approximant(None, None, TowerBound(tower_q_log2(3)), log2_q=tower_q_log2(3), label="s_3"))
    ctx = _ctx(precision_bits)
    s2 = Fraction(1, 2) + Fraction(1, 256)
    lo = _iv_frac(ctx, s2)
    value = ctx.mpf([lo.a, (lo + ctx.mpf(2) ** (-(tower_q_log2(3) - 1))).b])
    return LiouvilleApprox(approx, value, precision_bits, label=f"tower:{K}", meta={"partial_sums": [str(a.fraction) for a in approx if a.q]})


def tower_partial_sum(K):
    s = Fraction(0)
    for n in range(1, K + 1):
        s += Fraction(1, tower_q(n))
    return s


def lacunary_liouville(exponents, precision_bits: int | None = None) -> LiouvilleApprox:
    """alpha = sum_j 2**-e_j + t * 2**-e_J with t in [0, 1].

    Approximants are the partial sums s_0 = 0/1, s_1, ..., s_J.  Only the
    listed exponents are assumed; the unknown tail is bounded by 2**-e_J.
    """
    if precision_bits is None:
        precision_bits = default_precision()
    e = [int(v) for v in exponents]
    if not e or any(b <= a for a, b in zip(e, e[1:])) or e[0] < 1:
        raise ValueError("lacunary exponents must be strictly increasing positive integers")
    terms = [Fraction(1, 1 << k) for k in e]
    tail = terms[-1]
    approx = []
    s = Fraction(0)
    for k in range(len(e) + 1):
        if k:
            s += terms[k - 1]
        rest = sum(terms[k:], Fraction(0))
        approx.append(Approximant(s.numerator, s.denominator, ExactBound(rest + tail, rest), label=f"s_{k}"))
    ctx = _ctx(precision_bits)
    v = _iv_frac(ctx, s)
    value = ctx.mpf([v.a, (v + _iv_frac(ctx, tail)).b])
    return LiouvilleApprox(approx, value, precision_bits, label="lacunary:" + ",".join(map(str, e)))


def from_convergents(pairs, value: str | None = None, precision_bits: int | None = None) -> LiouvilleApprox:
    """Approximants from an explicit list of fractions.

    With `value` (a decimal string) alpha is the outward-rounded enclosure of
    that decimal.  Without it, alpha is only known to lie between the last two
    listed fractions, and the error bounds are exact rationals from that interval.
    """
    if precision_bits is None:
        precision_bits = default_precision()
    fr = [Fraction(int(p), int(q)) for p, q in pairs]
    if len(fr) < 2 and value is None:
        raise InsufficientApproximants("need at least two fractions or an explicit value")
    ctx = _ctx(precision_bits)
    approx = []
    if value is not None:
        enc = ctx.mpf(str(value))
        lo, hi = _iv_bounds(enc)
        val = enc
    else:
        lo, hi = min(fr[-2:]), max(fr[-2:])
        val = ctx.mpf([_iv_frac(ctx, lo).a, _iv_frac(ctx, hi).b])
    for k, (p, q) in enumerate(pairs):
        r = fr[k]
        if r.denominator != int(q):
            raise ValueError(f"{p}/{q} is not reduced")
        up = max(abs(r - lo), abs(r - hi))
        low = Fraction(0) if lo <= r <= hi else min(abs(r - lo), abs(r - hi))
        approx.append(Approximant(r.numerator, r.denominator, ExactBound(up, low), label=f"c_{k}"))
    return LiouvilleApprox(approx, val, precision_bits, label="convergents")


def golden_ratio_convergents(count: int = 12, precision_bits: int | None = None) -> LiouvilleApprox:
    """Convergents 1/1, 1/2, 2/3, ... of (sqrt 5 - 1)/2 with an interval enclosure of the value."""
    if precision_bits is None:
        precision_bits = default_precision()
    a, b = 1, 1
    pairs = []
    for _ in range(count):
        pairs.append((a, b))
        a, b = b, a + b
    ctx = _ctx(precision_bits + 32)
    enc = (ctx.sqrt(5) - 1) / 2
    lo, hi = _iv_bounds(enc)
    approx = []
    for k, (p, q) in enumerate(pairs):
        r = Fraction(p, q)
        up = max(abs(r - lo), abs(r - hi))
        low = min(abs(r - lo), abs(r - hi))
        approx.append(Approximant(p, q, ExactBound(up, low), label=f"F_{k}"))
    return LiouvilleApprox(approx, enc, precision_bits, label="golden")


def parse_alpha(spec, precision_bits: int | None = None) -> LiouvilleApprox:
    """Accept "tower:K", "lacunary:e1,e2,...", "golden:count" or {"approximants": [[p, q], ...]}."""
    if isinstance(spec, dict):
        if "approximants" not in spec:
            raise ValueError("alpha record needs an 'approximants' list")
        return from_convergents(spec["approximants"], spec.get("value"), precision_bits)
    kind, _, arg = str(spec).partition(":")
    if kind == "tower":
        return tower_liouville(int(arg or 2), precision_bits)
    if kind == "lacunary":
        return lacunary_liouville([int(t) for t in arg.split(",") if t.strip()], precision_bits)
    if kind == "golden":
        return golden_ratio_convergents(int(arg or 12), precision_bits)
    raise ValueError(f"unrecognised alpha specification {spec!r}")


# certified checks


@dataclass
class CheckResult:
    ok: bool
    witnesses: list
    failures: list
    certified_failures: list
    precision_used: int = 0

    @property
    def first_failure(self):
        return self.failures[0] if self.failures else None

    def __bool__(self):
        return self.ok


def _decide(fn, start_prec):
    prec = max(64, int(start_prec))
    while prec <= MAX_PRECISION:
        out = fn(_ctx(prec))
        if out is not None:
            return out, prec
        prec *= 2
    return None, prec // 2


def _l_holds(a: Approximant, N: int, start_prec: int):
    """Certify |alpha - p/q| < q^-N."""
    b = a.bound
    if isinstance(b, ExactBound) and a.q is not None:
        if b.upper * Fraction(a.q) ** N < 1:
            return True, 0
        if b.lower * Fraction(a.q) ** N >= 1:
            return False, 0
        return None, 0

    def fn(ctx):
        Y = ctx.mpf(N) * a.log2q_iv(ctx)
        return b.neglog2_exceeds(ctx, Y)

    return _decide(fn, start_prec)


def _ul_rhs_log2(ctx, a: Approximant, N: int, C: Fraction, eps: Fraction):
    """Interval for log2 of the reciprocal of eps / (q^N exp((C q^N)^2))."""
    log2q = a.log2q_iv(ctx)
    qN = ctx.mpf(2) ** (ctx.mpf(N) * log2q) if a.q is None else ctx.mpf(a.q) ** N
    cq = _iv_frac(ctx, C) * qN
    log2e = 1 / ctx.log(2)
    return -ctx.log(_iv_frac(ctx, eps)) / ctx.log(2) + ctx.mpf(N) * log2q + cq * cq * log2e


def ul_holds(a: Approximant, N: int, C, eps, start_prec: int | None = None):
    """Certify |alpha - p/q| < eps / (q^N e^{(C q^N)^2}); returns (True/False/None, precision)."""
    C = Fraction(C)
    eps = Fraction(eps)
    if start_prec is None:
        start_prec = default_precision()

    def fn(ctx):
        return a.bound.neglog2_exceeds(ctx, _ul_rhs_log2(ctx, a, N, C, eps))

    return _decide(fn, start_prec)


def _run_check(x: LiouvilleApprox, count: int, test):
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(x.approximants) < count:
        raise InsufficientApproximants(f"{count} witnesses requested but only {len(x.approximants)} approximants stored")
    wit, fail, cert, used = [], [], [], 0
    for i, a in enumerate(x.approximants):
        res, prec = test(a)
        used = max(used, prec)
        if res:
            wit.append(a)
        else:
            fail.append(i)
            if res is False:
                cert.append(i)
    return CheckResult(len(wit) >= count, wit[:count] if len(wit) >= count else wit, fail, cert, used)


def check_L(x: LiouvilleApprox, N: int, count: int = 1, start_prec: int | None = None) -> CheckResult:
    """Witnesses p/q among the approximants with |alpha - p/q| < 1/q^N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    sp = default_precision() if start_prec is None else start_prec
    return _run_check(x, count, lambda a: _l_holds(a, N, sp))


def check_UL(x: LiouvilleApprox, N: int, C, eps, count: int = 1, start_prec: int | None = None) -> CheckResult:
    """Witnesses with |alpha - p/q| < eps / (q^N exp((C q^N)^2))."""
    C = Fraction(C)
    eps = Fraction(eps)
    if N < 1:
        raise ValueError("N must be >= 1")
    if C <= 1:
        raise ValueError("C must exceed 1")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return _run_check(x, count, lambda a: ul_holds(a, N, C, eps, start_prec))


def certified_exp_upper(x: Fraction, start_prec: int = 64) -> Fraction:
    """A rational upper bound for exp(x) from outward-rounded interval arithmetic."""
    ctx = _ctx(start_prec)
    return _iv_bounds(ctx.exp(_iv_frac(ctx, Fraction(x))))[1]


def certified_log_upper(x: Fraction, prec: int = 128) -> Fraction:
    ctx = _ctx(prec)
    return _iv_bounds(ctx.log(_iv_frac(ctx, Fraction(x))))[1]


def certified_log_lower(x: Fraction, prec: int = 128) -> Fraction:
    ctx = _ctx(prec)
    return _iv_bounds(ctx.log(_iv_frac(ctx, Fraction(x))))[0]
