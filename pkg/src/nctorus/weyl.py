"""Finitely supported elements of the rotation algebra A_{2 alpha} in Weyl form.

An element is a finite map (m, n) -> complex amplitude f(m, n), standing for
W(f) = sum f(m, n) W(m, n).  Products are twisted convolutions

    (f * g)(a) = sum_A f(A) g(a - A) exp(-2 pi i alpha sigma(a, A)),
    sigma((m, n), (M, N)) = m N - M n.

The n-th slice f^(n)(z) = sum_m f(m, n) z^m is a trigonometric polynomial on
the circle, evaluated at angle coordinates x in [0, 1), z = exp(2 pi i x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circle import DEFAULT_GRID, CircleDiffeo

_PRUNE = 0.0


def as_alpha(alpha) -> Fraction:
    """Exact rational form of alpha (decimal strings are taken literally)."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, (int, float)):
        return Fraction(alpha)
    if isinstance(alpha, str):
        return Fraction(alpha.strip())
    raise TypeError(f"cannot interpret alpha of type {type(alpha).__name__}")


def alpha_decimal(alpha: Fraction, digits: int = 40) -> str:
    """Decimal string of alpha with the given number of fractional digits (exact rounding)."""
    scaled = round(alpha * 10 ** digits)
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled)).rjust(digits + 1, "0")
    out = f"{sign}{s[:-digits]}.{s[-digits:]}".rstrip("0")
    return out + "0" if out.endswith(".") else out


def phase(alpha: Fraction, k: int) -> complex:
    """exp(2 pi i alpha k), with alpha * k reduced mod 1 exactly before rounding."""
    t = float((alpha * k) % 1)
    return complex(math.cos(2 * math.pi * t), math.sin(2 * math.pi * t))


def sigma(a, A) -> int:
    return a[0] * A[1] - A[0] * a[1]


@dataclass(frozen=True, eq=False)
class WeylElement:
    terms: dict
    alpha: Fraction
    _phases: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        clean = {}
        for (m, n), v in self.terms.items():
            v = complex(v)
            if abs(v) > _PRUNE:
                clean[(int(m), int(n))] = v
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "alpha", as_alpha(self.alpha))

    # construction
    @classmethod
    def delta(cls, m, n, alpha, amp=1.0):
        return cls({(m, n): amp}, alpha)

    @classmethod
    def unit(cls, alpha):
        return cls.delta(0, 0, alpha)

    @classmethod
    def from_slices(cls, slices: dict, alpha):
        """slices: n -> {m: coefficient}."""
        return cls({(m, n): v for n, row in slices.items() for m, v in row.items()}, alpha)

    @classmethod
    def random(cls, rng, alpha, m_range=3, n_range=2, nterms=6, scale=1.0):
        terms = {}
        while len(terms) < nterms:
            key = (int(rng.integers(-m_range, m_range + 1)), int(rng.integers(-n_range, n_range + 1)))
            terms[key] = scale * complex(rng.normal(), rng.normal())
        return cls(terms, alpha)

    # JSON
    def to_json(self):
        return {
            "alpha": alpha_decimal(self.alpha),
            "terms": [[m, n, v.real, v.imag] for (m, n), v in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, d):
        try:
            return cls({(int(t[0]), int(t[1])): complex(float(t[2]), float(t[3])) for t in d["terms"]}, d["alpha"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed Weyl element: {exc}") from exc

    # inspection
    def __getitem__(self, key):
        return self.terms.get(key, 0j)

    def __len__(self):
        return len(self.terms)

    @property
    def n_support(self):
        return sorted({n for _, n in self.terms})

    @property
    def m_extent(self):
        return max((abs(m) for m, _ in self.terms), default=0)

    @property
    def n_extent(self):
        return max((abs(n) for _, n in self.terms), default=0)

    def l1(self):
        return sum(abs(v) for v in self.terms.values())

    def slice(self, n) -> dict:
        return {m: v for (m, k), v in self.terms.items() if k == n}

    def slice_values(self, n, x):
        """f^(n) at angle coordinates x."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for m, v in self.slice(n).items():
            out += v * np.exp(2j * np.pi * m * x)
        return out

    def _phase(self, s):
        if s not in self._phases:
            self._phases[s] = phase(self.alpha, -s)
        return self._phases[s]

    # algebra
    def _check(self, other):
        if self.alpha != other.alpha:
            raise ValueError(f"alpha mismatch: {self.alpha} vs {other.alpha}")

    def __add__(self, other):
        self._check(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0j) + v
        return WeylElement(t, self.alpha)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return WeylElement({k: c * v for k, v in self.terms.items()}, self.alpha)

    def __matmul__(self, other):
        return twisted_convolution(self, other)

    def max_abs_diff(self, other):
        keys = set(self.terms) | set(other.terms)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)


def twisted_convolution(f: WeylElement, g: WeylElement) -> WeylElement:
    f._check(g)
    out = {}
    for A, fa in f.terms.items():
        for B, gb in g.terms.items():
            a = (A[0] + B[0], A[1] + B[1])
            out[a] = out.get(a, 0j) + fa * gb * f._phase(sigma(a, A))
    return WeylElement(out, f.alpha)


def star(f: WeylElement) -> WeylElement:
    return WeylElement({(-m, -n): v.conjugate() for (m, n), v in f.terms.items()}, f.alpha)


def trace(f: WeylElement) -> complex:
    return f[(0, 0)]


@dataclass(eq=False)
class CircleMeasure:
    """Lebesgue measure, or the pushforward of Lebesgue measure by a degree-one map.

    For a pushforward the characteristic function is the trapezoidal rule
    mu(m) = mean_j exp(2 pi i m map(x_j)) on a G-point grid, which is the exact
    characteristic function of the empirical measure on the samples map(x_j).
    map may be a CircleDiffeo or any vectorised callable returning lift values.
    """

    kind: str = "lebesgue"
    pushforward_map: object = None
    grid: int = DEFAULT_GRID
    char_fn_cache: dict = field(default_factory=dict, repr=False)
    _samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("lebesgue", "pushforward"):
            raise ValueError("kind must be 'lebesgue' or 'pushforward'")
        if self.kind == "pushforward" and self.pushforward_map is None:
            raise ValueError("pushforward measure needs a map")

    @classmethod
    def lebesgue(cls):
        return cls("lebesgue")

    @classmethod
    def pushforward(cls, fmap, grid=None):
        if grid is None:
            grid = fmap.grid if isinstance(fmap, CircleDiffeo) else DEFAULT_GRID
        return cls("pushforward", fmap, int(grid))

    def samples(self):
        """Support points (angle coordinates, mod 1) of the quadrature measure."""
        if self.kind == "lebesgue":
            return np.arange(self.grid) / self.grid
        if self._samples is None:
            fm = self.pushforward_map
            if isinstance(fm, CircleDiffeo) and fm.grid == self.grid:
                y = fm.lift_grid()
            else:
                y = np.asarray(fm(np.arange(self.grid) / self.grid), dtype=float)
            self._samples = np.mod(y, 1.0)
        return self._samples

    def char(self, m: int) -> complex:
        m = int(m)
        if self.kind == "lebesgue":
            return 1.0 + 0j if m == 0 else 0j
        if m not in self.char_fn_cache:
            if m == 0:
                val = 1.0 + 0j
            elif -m in self.char_fn_cache:
                val = self.char_fn_cache[-m].conjugate()
            else:
                val = complex(np.exp(2j * np.pi * m * self.samples()).mean())
            self.char_fn_cache[m] = val
        return self.char_fn_cache[m]

    def integrate(self, fn):
        """int fn dmu for a vectorised function of angle coordinates."""
        x = self.samples()
        return np.mean(fn(x))


def state_omega_mu(f: WeylElement, mu: CircleMeasure) -> complex:
    """omega_mu(W(f)) = sum_m mu(m) f(m, 0)."""
    return complex(sum(mu.char(m) * v for (m, n), v in f.terms.items() if n == 0))


def omega_integral_form(f: WeylElement, mu: CircleMeasure) -> float:
    """sum_n int |f^(n)(R^n z)|^2 dmu(z), the value of omega_mu(star(f) * f)."""
    x = mu.samples()
    total = 0.0
    for n in f.n_support:
        shift = float((f.alpha * n) % 1)
        total += float(np.mean(np.abs(f.slice_values(n, x + shift)) ** 2))
    return total


def gram_matrix(basis, state) -> np.ndarray:
    """G_ij = state(star(f_i) * f_j)."""
    k = len(basis)
    S = [star(b) for b in basis]
    G = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(i, k):
            G[i, j] = state(twisted_convolution(S[i], basis[j]))
            G[j, i] = G[i, j].conjugate()
    return G


def gram_positivity_check(basis, mu: CircleMeasure) -> float:
    """Smallest eigenvalue of the Gram matrix of omega_mu on the basis."""
    G = gram_matrix(basis, lambda f: state_omega_mu(f, mu))
    return float(np.linalg.eigvalsh(G).min())


def _arc_contains(x, a, b):
    """Open arc from a counterclockwise to b (angle coordinates mod 1)."""
    x = np.mod(x, 1.0)
    a, b = a % 1.0, b % 1.0
    if a < b:
        return (x > a) & (x < b)
    return (x > a) | (x < b)


def bump_coefficients(a: float, b: float, bandwidth: int, margin: float = 0.1, fine: int = 1 << 14):
    """Fourier coefficients g(m), |m| <= bandwidth, of a smooth bump inside the arc (a, b)."""
    length = (b - a) % 1.0
    lo = a + margin * length
    width = length * (1 - 2 * margin)
    x = np.arange(fine) / fine
    t = np.mod(x - lo, 1.0) / width
    inside = (t > 0) & (t < 1)
    s = np.zeros(fine)
    u = 2 * t[inside] - 1
    s[inside] = np.exp(1.0 - 1.0 / (1.0 - u * u))
    X = np.fft.fft(s) / fine
    m = np.arange(-bandwidth, bandwidth + 1)
    return {int(k): complex(X[k % fine]) for k in m}


def faithfulness_probe(mu: CircleMeasure, gap, alpha="0", bandwidth: int = 96):
    """Witness g != 0 with omega_mu(star(g) * g) ~ 0 when supp(mu) misses the arc gap.

    Returns None when the arc is empty or meets the support of mu, otherwise
    (g, omega_mu(star(g) * g)).
    """
    a, b = float(gap[0]), float(gap[1])
    if (b - a) % 1.0 == 0.0 or mu.kind == "lebesgue":
        return None
    if np.any(_arc_contains(mu.samples(), a, b)):
        return None
    coeffs = bump_coefficients(a, b, bandwidth)
    g = WeylElement({(m, 0): v for m, v in coeffs.items()}, alpha)
    val = state_omega_mu(twisted_convolution(star(g), g), mu)
    return g, float(val.real)


def _char_of(nu):
    if isinstance(nu, CircleMeasure):
        return nu.char
    if isinstance(nu, dict):
        return lambda m: complex(nu.get(m, 0j))
    return nu


def state_transverse(f: WeylElement, nu) -> complex:
    """sum_m exp(2 pi i alpha m^2) nu(m) f(m, -m)."""
    ch = _char_of(nu)
    return complex(sum(phase(f.alpha, m * m) * ch(m) * v for (m, n), v in f.terms.items() if m + n == 0))


def transverse_gram_check(basis, nu) -> float:
    G = gram_matrix(basis, lambda f: state_transverse(f, nu))
    return float(np.linalg.eigvalsh(G).min())
