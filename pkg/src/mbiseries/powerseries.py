"""Truncated power series over any coefficient ring.

Coefficients may be Python numbers, :class:`fractions.Fraction` or numpy
arrays (one series per grid node).  A series of ``order`` n keeps the
coefficients of ``t^0 .. t^n``; higher terms are unknown, so binary
operations truncate to the smaller order.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _is_zero(c):
    if isinstance(c, np.ndarray):
        return not c.any()
    return c == 0


def _is_one(c):
    if isinstance(c, np.ndarray):
        return bool(np.all(c == 1))
    return c == 1


class TruncatedSeries:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs, order=None):
        coeffs = list(coeffs)
        if order is not None:
            coeffs = coeffs[: order + 1] + [0] * (order + 1 - len(coeffs))
        if not coeffs:
            raise ValueError("a truncated series needs at least one coefficient")
        self.coeffs = coeffs

    @property
    def order(self):
        return len(self.coeffs) - 1

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        return f"TruncatedSeries({self.coeffs!r})"

    def truncate(self, order):
        return TruncatedSeries(self.coeffs, order)

    def _other(self, other):
        if isinstance(other, TruncatedSeries):
            return other
        return TruncatedSeries([other], self.order)

    def __add__(self, other):
        other = self._other(other)
        n = min(self.order, other.order)
        return TruncatedSeries([self.coeffs[k] + other.coeffs[k] for k in range(n + 1)])

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._other(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries([c * other for c in self.coeffs])
        n = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(n + 1):
            acc = 0
            for i in range(k + 1):
                if _is_zero(a[i]) or _is_zero(b[k - i]):
                    continue
                acc = acc + a[i] * b[k - i]
            out.append(acc)
        return TruncatedSeries(out)

    __rmul__ = __mul__

    def shift(self, k=1):
        """Multiply by ``t^k`` keeping the same order."""
        zero = 0 * self.coeffs[0]
        return TruncatedSeries([zero] * k + self.coeffs[: len(self.coeffs) - k])

    def __pow__(self, m: int):
        if m < 0:
            return self.reciprocal() ** (-m)
        out = TruncatedSeries([1], self.order)
        base = self
        while m:
            if m & 1:
                out = out * base
            base = base * base
            m >>= 1
        return out

    def reciprocal(self):
        """``1/a`` by Newton iteration ``y <- y (2 - a y)``."""
        a0 = self.coeffs[0]
        y = TruncatedSeries([1 / a0 if not isinstance(a0, int) else Fraction(1, a0)])
        return self._newton(y, lambda y, a: y * (2 - a * y))

    def rsqrt(self):
        """``1/sqrt(a)`` for a series with constant term 1, via ``y <- y (3 - a y^2) / 2``."""
        if not _is_one(self.coeffs[0]):
            raise ValueError("rsqrt needs a constant term equal to one")
        half = Fraction(1, 2) if not isinstance(self.coeffs[0], (float, np.ndarray)) else 0.5
        y = TruncatedSeries([self.coeffs[0] * 1])
        return self._newton(y, lambda y, a: y * (3 - a * (y * y)) * half)

    def sqrt(self):
        return self * self.rsqrt()

    def _newton(self, y, update):
        prec = 1
        while prec < len(self.coeffs):
            prec = min(2 * prec, len(self.coeffs))
            a = self.truncate(prec - 1)
            y = update(y.truncate(prec - 1), a)
        return y

    def compose(self, inner):
        """``self(inner(t))`` for ``inner`` with zero constant term (Horner)."""
        if not _is_zero(inner.coeffs[0]):
            raise ValueError("inner series must have zero constant term")
        n = min(self.order, inner.order)
        out = TruncatedSeries([self.coeffs[n]], n)
        inner = inner.truncate(n)
        for c in reversed(self.coeffs[:n]):
            out = out * inner + c
        return out

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


def power_coeffs(a, m, n):
    """Coefficients ``0..n`` of ``a(t)^m`` for ``a[0] == 1`` (J.C.P. Miller recurrence).

    ``p_k = (1/k) sum_{i=1}^k ((m+1) i - k) a_i p_{k-i}``; exact on Fractions.
    """
    if a[0] != 1:
        raise ValueError("power recurrence expects a[0] == 1")
    p = [Fraction(1)]
    for k in range(1, n + 1):
        acc = 0
        for i in range(1, min(k, len(a) - 1) + 1):
            if a[i]:
                acc += ((m + 1) * i - k) * a[i] * p[k - i]
        p.append(Fraction(acc) / k)
    return p
