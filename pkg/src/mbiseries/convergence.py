"""Exact majorant coefficients, radius of convergence and run certificates.

The norms of the series coefficients obey ``N_k <= R_k N^(2k+1)``.  The
generating function ``G(xi) = sum_k R_k xi^(2k+1)`` is the compositional
inverse of ``xi(g) = 2g - (g + g^3)/sqrt(1 - g^2 - g^4)``; its radius of
convergence ``xi*`` is the critical value of ``xi(g)`` nearest the origin.

The purely electric and purely magnetic problems have the sharper majorant
``xi(g) = 2g - g/sqrt(1 - g^2)`` with radius ``(2^(2/3) - 1)^(3/2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import mpmath
import numpy as np

from .errors import ConfigError, NumericalError
from .powerseries import TruncatedSeries, power_coeffs

MODES = ("em", "electrostatic", "magnetostatic")
EXACT_TABLE_TERMS = 30  # R_0 .. R_29 are summed exactly in tail bounds
DEFAULT_SAFETY = 2.0
COEFF_CAP = 400


# -- combinatorics ------------------------------------------------------------

def compositions(total: int, slots: int):
    """All tuples of ``slots`` non-negative integers summing to ``total`` (ordered).

    Empty when ``total < 0``; the empty tuple is the only composition of 0
    into 0 slots.
    """
    if total < 0 or (slots == 0 and total != 0):
        return
    if slots == 0:
        yield ()
        return
    # stars and bars: choose positions of the slots-1 separators
    for bars in itertools.combinations(range(total + slots - 1), slots - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(total + slots - 1 - prev - 1)
        yield tuple(parts)


@dataclass(frozen=True)
class MultiIndexEnumerator:
    """Iterates the multi-indices ``l`` with ``|l|_slots == total``."""

    slots: int
    total: int

    def __iter__(self):
        return compositions(self.total, self.slots)

    def __len__(self):
        if self.total < 0 or (self.slots == 0 and self.total != 0):
            return 0
        if self.slots == 0:
            return 1
        return comb(self.total + self.slots - 1, self.slots - 1)


def maclaurin_coeffs(n: int):
    """``M_0 .. M_n`` of ``1/sqrt(1+z)``: ``M_j = (-1)^j (2j-1)!! / (j! 2^j)``."""
    M = [Fraction(1)]
    for j in range(n):
        M.append(M[-1] * Fraction(-(2 * j + 1), 2 * j + 2))
    return M


# -- the generating function ----------------------------------------------------

def _inverse_sqrt_binomial(u_coeffs, n):
    """Coefficients 0..n of ``(1 - u)^(-1/2)`` for a polynomial ``u`` without constant term."""
    out = [Fraction(0)] * (n + 1)
    upow = [Fraction(1)] + [Fraction(0)] * n
    for j in range(n + 1):
        c = Fraction(comb(2 * j, j), 4**j)
        if not any(upow):
            break
        for i in range(n + 1):
            out[i] += c * upow[i]
        new = [Fraction(0)] * (n + 1)
        for i, a in enumerate(upow):
            if a:
                for p, b in enumerate(u_coeffs):
                    if b and i + p <= n:
                        new[i + p] += a * b
        upow = new
    return out


def xi_series_of_g(order: int, electrostatic=False):
    """Exact Taylor coefficients ``c_0 .. c_order`` of ``xi(g)`` at ``g = 0``.

    ``xi(g) = 2g - (g + g^3)/sqrt(1 - g^2 - g^4)``, or with
    ``electrostatic=True`` the single-field version ``2g - g/sqrt(1 - g^2)``.
    """
    u = [0, 0, 1] if electrostatic else [0, 0, 1, 0, 1]
    w = _inverse_sqrt_binomial(u, order)
    xi = [Fraction(0)] * (order + 1)
    if order >= 1:
        xi[1] += 2
    for i, c in enumerate(w):
        if i + 1 <= order:
            xi[i + 1] -= c
        if not electrostatic and i + 3 <= order:
            xi[i + 3] -= c
    return xi


@dataclass
class RationalSeq:
    """Exact majorant coefficients ``R_k`` with derived integers and ``C_h``."""

    R: list
    electrostatic: bool = False
    _C: list = field(default=None, repr=False)

    @property
    def S(self):
        """``S_{k+1} = 4^k R_k``; raises if any value is not an integer."""
        out = []
        for k, r in enumerate(self.R):
            s = r * 4**k
            if s.denominator != 1:
                raise NumericalError(f"4^{k} R_{k} = {s} is not an integer")
            out.append(int(s))
        return out

    @property
    def C(self):
        """``C_h``: coefficients of ``(1 - G^2 - G^4)^(-1/2)`` in powers of ``xi^2``."""
        if self._C is None:
            n = len(self.R) - 1
            g = TruncatedSeries([self.R[k // 2] if k % 2 else Fraction(0)
                                 for k in range(2 * n + 1)])
            g2 = g * g
            s = 1 - g2 if self.electrostatic else 1 - g2 - g2 * g2
            w = s.rsqrt()
            self._C = [w[2 * h] for h in range(n + 1)]
        return self._C

    def ratios(self):
        return [self.R[k + 1] / self.R[k] for k in range(len(self.R) - 1)]

    def table(self):
        """Rows ``{k, R, numerator, denominator, S}`` with exact decimal strings."""
        rows = []
        for k, (r, s) in enumerate(zip(self.R, self.S)):
            rows.append({"k": k, "R": str(r),
                         "numerator": str(r.numerator), "denominator": str(r.denominator),
                         "S": str(s)})
        return rows


def invert_series(xi_coeffs, n_terms: int, electrostatic=False) -> RationalSeq:
    """Compositional inverse of ``xi(g)`` by Lagrange inversion.

    ``xi_coeffs`` must start ``0, 1`` and be odd.  Writing ``xi = g F(g^2)``
    and ``Phi = 1/F``, Lagrange's formula gives
    ``[xi^(2k+1)] G = [t^k] Phi(t)^(2k+1) / (2k+1)``, evaluated exactly with
    the power recurrence.  Returns ``R_0 .. R_{n_terms-1}``.
    """
    n = n_terms - 1
    if len(xi_coeffs) < 2 * n + 2:
        raise ValueError(f"need {2 * n + 2} coefficients of xi(g), got {len(xi_coeffs)}")
    if xi_coeffs[0] != 0 or xi_coeffs[1] != 1:
        raise ValueError("xi(g) must vanish at 0 with unit derivative")
    if any(xi_coeffs[i] for i in range(0, 2 * n + 2, 2)):
        raise ValueError("xi(g) must be odd")
    F = TruncatedSeries([Fraction(xi_coeffs[2 * k + 1]) for k in range(n + 1)])
    phi = F.reciprocal().coeffs
    R = [power_coeffs(phi, 2 * k + 1, k)[k] / (2 * k + 1) for k in range(n + 1)]
    if any(r <= 0 for r in R):
        raise NumericalError("non-positive majorant coefficient")
    return RationalSeq(R, electrostatic=electrostatic)


@lru_cache(maxsize=4)
def majorant_sequence(n_terms: int = EXACT_TABLE_TERMS, electrostatic=False) -> RationalSeq:
    if n_terms > COEFF_CAP + 1:
        raise ConfigError(f"at most {COEFF_CAP + 1} coefficients are supported")
    xi = xi_series_of_g(2 * n_terms, electrostatic=electrostatic)
    return invert_series(xi, n_terms, electrostatic=electrostatic)


def _composition_product_sum(R, total, slots):
    acc = Fraction(0)
    for comp in compositions(total, slots):
        p = Fraction(1)
        for a in comp:
            p *= R[a]
        acc += p
    return acc


def rk_recursion_oracle(n: int):
    """``R_0 .. R_n`` and ``C_0 .. C_n`` from the norm-estimate recursion by brute enumeration.

    ``C_h = sum_j |M_j| sum_l binom(j,l) sum_{|a|_{2l}+|b|_{4(j-l)} = h+l-2j} prod R``
    and ``R_k = sum_h (C_h + sum_g C_{h-1-g} sum_{|a|_2=g} R_a1 R_a2) R_{k-h}``.
    Cost grows combinatorially; intended for n <= 6.
    """
    M = maclaurin_coeffs(n)
    R = [Fraction(1)]
    C = [Fraction(1)]
    for k in range(1, n + 1):
        # C_k only involves R_l with l < k
        c = Fraction(0)
        for j in range(1, k + 1):
            for l in range(j + 1):
                total = k + l - 2 * j
                slots = 2 * l + 4 * (j - l)
                c += abs(M[j]) * comb(j, l) * _composition_product_sum(R, total, slots)
        C.append(c)
        r = Fraction(0)
        for h in range(1, k + 1):
            inner = C[h]
            for g in range(h):
                inner += C[h - 1 - g] * _composition_product_sum(R, g, 2)
            r += inner * R[k - h]
        R.append(r)
    return R, C


# -- critical points ---------------------------------------------------------------

def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def ptilde_coefficients():
    """Integer coefficients (ascending) of ``(1+3g^2-g^4-g^6)^2 - 4(1-g^2-g^4)^3``."""
    a = [1, 0, 3, 0, -1, 0, -1]
    s = [1, 0, -1, 0, -1]
    lhs = _poly_mul(a, a)
    rhs = _poly_mul(_poly_mul(s, s), s)
    return [x - 4 * y for x, y in itertools.zip_longest(lhs, rhs, fillvalue=0)]


def xi_of_g(g):
    """``xi(g)`` with the principal branch of the square root (complex-safe)."""
    sq = mpmath.sqrt(1 - g**2 - g**4)
    return 2 * g - (g + g**3) / sq


def dxi_numerator(g):
    """Numerator of ``-dxi/dg``: ``1 + 3g^2 - g^4 - g^6 - 2 sqrt(1-g^2-g^4)^3``."""
    sq = mpmath.sqrt(1 - g**2 - g**4)
    return 1 + 3 * g**2 - g**4 - g**6 - 2 * sq**3


@dataclass
class CriticalPointReport:
    ptilde_coeffs: list
    roots: list
    residuals: list
    genuine: list
    xi_values: list
    radius: float
    g_bullet: float

    @property
    def genuine_zeros(self):
        return [r for r, ok in zip(self.roots, self.genuine) if ok]

    @property
    def distinct_xi_values(self):
        out = []
        for v in sorted(self.xi_values):
            if not out or abs(v - out[-1]) > 1e-9 * max(1.0, v):
                out.append(v)
        return out

    def to_dict(self):
        return {
            "ptilde_coeffs": self.ptilde_coeffs,
            "roots": [{"re": r.real, "im": r.imag, "residual": res, "genuine": ok}
                      for r, res, ok in zip(self.roots, self.residuals, self.genuine)],
            "genuine_zeros": [{"re": r.real, "im": r.imag} for r in self.genuine_zeros],
            "xi_values": self.xi_values,
            "distinct_xi_values": self.distinct_xi_values,
            "radius": self.radius,
            "g_bullet": self.g_bullet,
        }


@lru_cache(maxsize=1)
def critical_points(dps: int = 40) -> CriticalPointReport:
    """Zeros of ``dxi/dg``, their ``|xi|`` values and the radius ``xi*``.

    All twelve roots of the squared numerator come from companion-matrix
    eigenvalues, then Newton polishing in ``dps``-digit arithmetic.  A root
    is genuine when the unsquared numerator (principal square root branch)
    also vanishes there.
    """
    coeffs = ptilde_coefficients()
    approx = np.roots(coeffs[::-1])
    with mpmath.workdps(dps):
        desc = [mpmath.mpf(c) for c in coeffs[::-1]]

        def p(x):
            return mpmath.polyval(desc, x)

        roots, residuals, genuine, xis = [], [], [], []
        for z in approx:
            g = mpmath.findroot(p, mpmath.mpc(z), tol=mpmath.mpf(10) ** (-dps + 5))
            roots.append(complex(g))
            residuals.append(float(abs(p(g))))
            ok = abs(dxi_numerator(g)) < mpmath.mpf(10) ** (-dps // 2)
            genuine.append(bool(ok))
            if ok:
                xis.append(float(abs(xi_of_g(g))))
        g_bullet = float(mpmath.sqrt((mpmath.sqrt(5) - 1) / 2))
    order = sorted(range(len(roots)), key=lambda i: (abs(roots[i]), roots[i].real, roots[i].imag))
    report = CriticalPointReport(
        ptilde_coeffs=coeffs,
        roots=[roots[i] for i in order],
        residuals=[residuals[i] for i in order],
        genuine=[genuine[i] for i in order],
        xi_values=xis,
        radius=min(xis),
        g_bullet=g_bullet,
    )
    if sum(report.genuine) != 6:
        raise NumericalError(f"expected 6 genuine critical points, found {sum(report.genuine)}")
    return report


def radius_of_convergence() -> float:
    return critical_points().radius


def electrostatic_radius() -> float:
    """``(2^(2/3) - 1)^(3/2)``, the radius for a single (electric or magnetic) field."""
    return (2.0 ** (2.0 / 3.0) - 1.0) ** 1.5


def radius_for_mode(mode: str) -> float:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    return radius_of_convergence() if mode == "em" else electrostatic_radius()


@dataclass(frozen=True)
class QRatio:
    q: float
    last_ratio: float
    last_k: int

    @property
    def gap(self):
        return self.q - self.last_ratio


def q_ratio(seq: RationalSeq | None = None) -> QRatio:
    """Asymptotic ratio ``q = 1/xi*^2`` plus the last ratio ``R_{k+1}/R_k`` available."""
    if seq is None:
        seq = majorant_sequence()
    radius = electrostatic_radius() if seq.electrostatic else radius_of_convergence()
    last = len(seq.R) - 2
    return QRatio(1.0 / radius**2, float(seq.R[last + 1] / seq.R[last]), last)


# -- certificates ----------------------------------------------------------------

@dataclass
class Certificate:
    beta: float
    norm_D: float
    norm_H: float
    mode: str
    K: int
    safety: float
    x_raw: float
    x: float
    radius_used: float
    tail_bound: float
    verdict: str
    boundary_mass: float | None = None
    norm_kind: str = "grid_proxy"

    @property
    def margin(self):
        return self.radius_used - self.x

    @property
    def raw_margin(self):
        return self.radius_used - self.x_raw

    @property
    def certified(self):
        return self.verdict == "certified"

    def to_dict(self):
        return {
            "beta": self.beta, "norm_D": self.norm_D, "norm_H": self.norm_H,
            "mode": self.mode, "K": self.K, "safety_factor": self.safety,
            "x_raw": self.x_raw, "x": self.x, "radius_used": self.radius_used,
            "margin": self.margin, "raw_margin": self.raw_margin,
            "tail_bound": self.tail_bound if math.isfinite(self.tail_bound) else None,
            "verdict": self.verdict, "boundary_mass": self.boundary_mass,
            "norm_kind": self.norm_kind,
        }


def majorant_tail(x: float, K: int, mode: str = "em") -> float:
    """Upper bound for ``sum_{k>K} R_k x^(2k)``.

    Exact ``R_k`` for ``k < 30``, then ``R_k <= q^k`` closed as a geometric
    series.  Requires ``q x^2 < 1``.
    """
    seq = majorant_sequence(EXACT_TABLE_TERMS, electrostatic=(mode != "em"))
    q = q_ratio(seq).q
    z = q * x * x
    if z >= 1.0:
        return math.inf
    total = 0.0
    for k in range(K + 1, EXACT_TABLE_TERMS):
        total += float(seq.R[k]) * x ** (2 * k)
    k0 = max(K + 1, EXACT_TABLE_TERMS)
    return total + z**k0 / (1.0 - z)


def certify(beta, norm_D, norm_H, K, mode="em", safety=DEFAULT_SAFETY,
            boundary_mass=None, boundary_tol=1e-3) -> Certificate:
    """Check ``beta^2 * safety * norm < radius(mode)`` and bound the truncation tail.

    ``norm`` is ``norm_D + norm_H`` in ``em`` mode, otherwise the norm of the
    single field.  The tail bound is ``N sum_{k>K} R_k x^(2k)`` with the
    safety-scaled ``N`` and ``x``; it is infinite unless certified.
    """
    if beta < 0 or norm_D < 0 or norm_H < 0:
        raise ConfigError("beta and norms must be non-negative")
    if safety < 1.0:
        raise ConfigError("safety factor must be at least 1")
    radius = radius_for_mode(mode)
    norm = {"em": norm_D + norm_H, "electrostatic": norm_D, "magnetostatic": norm_H}[mode]
    x_raw = beta**2 * norm
    x = x_raw * safety
    ok = x < radius
    if boundary_mass is not None and boundary_mass > boundary_tol:
        ok = False
    tail = safety * norm * majorant_tail(x, K, mode) if ok else math.inf
    if ok and not math.isfinite(tail):
        ok = False
    return Certificate(beta, norm_D, norm_H, mode, K, safety, x_raw, x, radius, tail,
                       "certified" if ok else "not_certified", boundary_mass)
