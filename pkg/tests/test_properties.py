"""Property-based checks of the exact and numerical building blocks."""

import math
from fractions import Fraction
from math import comb

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from mbiseries.convergence import certify, compositions, radius_of_convergence
from mbiseries.fieldio import read_mbif, write_mbif
from mbiseries.grid import GridSpec, ScalarField, VectorField3, curl, divergence, gradient
from mbiseries.powerseries import TruncatedSeries

fractions = st.fractions(min_value=-5, max_value=5, max_denominator=20)


def series(order, unit=False):
    head = st.just(Fraction(1)) if unit else fractions
    return st.tuples(head, st.lists(fractions, min_size=order, max_size=order)).map(
        lambda t: TruncatedSeries([t[0]] + t[1]))


@settings(max_examples=40, deadline=None)
@given(series(5), series(5), series(5))
def test_ring_axioms(a, b, c):
    assert ((a * b) * c).coeffs == (a * (b * c)).coeffs
    assert (a * (b + c)).coeffs == (a * b + a * c).coeffs
    assert (a * b).coeffs == (b * a).coeffs


@settings(max_examples=40, deadline=None)
@given(series(6, unit=True))
def test_inverse_square_root_identities(a):
    w = a.rsqrt()
    assert (a * w * w).coeffs == [1] + [0] * 6
    assert (a.sqrt() * w).coeffs == [1] + [0] * 6
    assert (a * a.reciprocal()).coeffs == [1] + [0] * 6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 7), st.integers(1, 5))
def test_composition_count(total, slots):
    got = list(compositions(total, slots))
    assert len(got) == comb(total + slots - 1, slots - 1)
    assert len(set(got)) == len(got)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.01, 3.0), st.floats(0.01, 3.0),
       st.integers(0, 8))
def test_certificate_monotone_in_beta(b1, b2, nd, nh, K):
    lo, hi = sorted((b1, b2))
    c_lo = certify(lo, nd, nh, K)
    c_hi = certify(hi, nd, nh, K)
    assert c_lo.x <= c_hi.x
    assert c_lo.tail_bound <= c_hi.tail_bound
    if c_hi.certified:
        assert c_lo.certified
    assert c_hi.certified == (c_hi.x < radius_of_convergence() and math.isfinite(c_hi.tail_bound))


@settings(max_examples=20, deadline=None)
@given(st.integers(8, 11), st.floats(0.1, 2.0), st.integers(0, 2**32 - 1), st.booleans())
def test_mbif_round_trip_bit_exact(tmp_path_factory, n, h, seed, vector):
    rng = np.random.default_rng(seed)
    g = GridSpec((n, n + 1, 8), h, tuple(rng.normal(size=3)))
    f = VectorField3(g, rng.normal(size=(3,) + g.dims)) if vector else ScalarField(g, rng.normal(size=g.dims))
    path = tmp_path_factory.mktemp("mbif") / "f.mbif"
    write_mbif(path, f)
    back = read_mbif(path)
    assert back.grid == g and type(back) is type(f)
    assert np.array_equal(back.values, f.values)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 2.0))
def test_discrete_div_curl_grad_identities(seed, h):
    rng = np.random.default_rng(seed)
    g = GridSpec.centered(10, h)
    A = VectorField3(g, rng.normal(size=(3,) + g.dims))
    phi = ScalarField(g, rng.normal(size=g.dims))
    # central differences commute, so these vanish away from the one-sided edges
    inner = (slice(2, -2),) * 3
    scale = max(A.max_abs(), phi.max_abs()) / h**2
    assert np.abs(divergence(curl(A)).values[inner]).max() < 1e-12 * scale
    assert np.abs(curl(gradient(phi)).values[(slice(None),) + inner]).max() < 1e-12 * scale
