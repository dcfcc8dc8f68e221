import numpy as np
import pytest

from mbiseries.errors import ConfigError, FieldStrengthError
from mbiseries.grid import (GridSpec, ScalarField, VectorField3, curl, divergence, dot,
                            interior_max, proxy_norm)
from mbiseries.potential import PotentialSolver, project_irrotational, project_solenoidal
from mbiseries.series import (MaclaurinCoeffs, SeriesEngine, SeriesState, assemble,
                              coefficient_norms, compute_X, compute_Y, compute_Z, norm_chain,
                              reconstruct_EB, residuals, series_oracle_XY)
from mbiseries.sources import SourceConfig, build_sources


def random_state(grid, rng, order, scale=0.5, with_h=True):
    D = [VectorField3(grid, scale * rng.normal(size=(3,) + grid.dims)) for _ in range(order + 1)]
    if with_h:
        H = [VectorField3(grid, scale * rng.normal(size=(3,) + grid.dims)) for _ in range(order + 1)]
    else:
        H = [VectorField3.zeros(grid) for _ in range(order + 1)]
    zero = ScalarField.zeros(grid)
    return SeriesState("em", D, H, [zero] * (order + 1), [zero] * (order + 1))


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


@pytest.fixture
def g8():
    return GridSpec.centered(8, 1.0)


def test_maclaurin_wrapper():
    M = MaclaurinCoeffs.up_to(3)
    assert M[1] == -0.5 and M[2] == 0.375


def test_Z_examples(g8, rng):
    st = random_state(g8, rng, 2)
    D0, H0 = st.D_coeffs[0].values, st.H_coeffs[0].values
    D1, H1 = st.D_coeffs[1].values, st.H_coeffs[1].values
    assert np.all(compute_Z(1, 1, 0, st).values == 0.0)
    np.testing.assert_allclose(compute_Z(1, 1, 1, st).values, (D0**2).sum(0) - (H0**2).sum(0))
    expect = ((D0 - H0) * (D1 + H1)).sum(0) + ((D1 - H1) * (D0 + H0)).sum(0)
    np.testing.assert_allclose(compute_Z(2, 1, 1, st).values, expect)
    # Z_{2,1,0}: four D.H factors... total -1 -> empty; Z_{2,2,0}: |b|_8 = -2 -> empty
    assert np.all(compute_Z(2, 2, 0, st).values == 0.0)
    with pytest.raises(ValueError):
        compute_Z(1, 2, 1, st)
    with pytest.raises(ValueError):
        compute_Z(4, 1, 1, st)


def test_X_Y_first_order(g8, rng):
    st = random_state(g8, rng, 0)
    D0, H0 = st.D_coeffs[0].values, st.H_coeffs[0].values
    assert np.all(compute_X(0, st).values == -1.0)
    np.testing.assert_allclose(compute_X(1, st).values, 0.5 * ((D0**2).sum(0) - (H0**2).sum(0)))
    X = [compute_X(0, st)]
    np.testing.assert_allclose(compute_Y(1, st, X).values, (D0 * H0).sum(0))


def test_Y_vanishes_without_H(g8, rng):
    st = random_state(g8, rng, 4, with_h=False)
    X = [compute_X(h, st) for h in range(5)]
    for h in range(1, 6):
        assert np.all(compute_Y(h, st, X) .values == 0.0)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_combinatorial_matches_series_oracle(seed):
    g = GridSpec.centered(8, 1.0)
    st = random_state(g, np.random.default_rng(seed), 5)
    Xo, Yo = series_oracle_XY(st, 6)
    X = [compute_X(h, st) for h in range(7)]
    for h in range(7):
        assert rel(X[h].values, Xo[h].values) < 1e-12
    for h in range(1, 7):
        assert rel(compute_Y(h, st, X).values, Yo[h].values) < 1e-12


def test_series_oracle_order_zero(g8, rng):
    st = random_state(g8, rng, 0)
    X, Y = series_oracle_XY(st, 0)
    assert np.all(X[0].values == -1.0) and np.all(Y[0].values == 0.0)


@pytest.fixture(scope="module")
def ball_ring():
    g = GridSpec.centered(24, 1.0)
    pair = build_sources([SourceConfig("mollified_ball", center=(0, 0, 0), radius=4.0),
                          SourceConfig("ring_current", center=(0, 0, 1.0), axis=(0.3, 0, 1),
                                       major_radius=4.5, minor_radius=1.5, amplitude=0.3)], g)
    return g, pair


def test_first_order_closed_form(ball_ring):
    g, pair = ball_ring
    solver = PotentialSolver(g, boundary_tol=None)
    eng = SeriesEngine(g, solver)
    st = eng.step(eng.seed(pair.rho, pair.j))
    DC, HA = st.D_coeffs[0], st.H_coeffs[0]
    s = (dot(DC, DC) - dot(HA, HA)) * 0.5
    p = dot(DC, HA)
    D1 = project_solenoidal(s * DC + p * HA, solver)
    H1 = project_irrotational(s * HA - p * DC, solver)
    assert rel(st.D_coeffs[1].values, D1.values) < 1e-12
    assert rel(st.H_coeffs[1].values, H1.values) < 1e-12


def test_side_conditions_and_paths_agree(ball_ring):
    g, pair = ball_ring
    solver = PotentialSolver(g, boundary_tol=None)
    a = SeriesEngine(g, solver, "combinatorial")
    b = SeriesEngine(g, solver, "series")
    sa = a.run(a.seed(pair.rho, pair.j), 3)
    sb = b.run(b.seed(pair.rho, pair.j), 3)
    for k in range(1, 4):
        Dk, Hk = sa.D_coeffs[k], sa.H_coeffs[k]
        assert interior_max(divergence(Dk), margin=2) < 1e-12 * proxy_norm(Dk).total
        assert interior_max(curl(Hk), margin=2) < 1e-12 * proxy_norm(Hk).total
        assert rel(Dk.values, sb.D_coeffs[k].values) < 1e-12
        assert rel(Hk.values, sb.H_coeffs[k].values) < 1e-12
    assert [d.xy_method for d in sb.diagnostics] == ["series"] * 3


def test_specializations_agree():
    g = GridSpec.centered(24, 1.0)
    eng = SeriesEngine(g, PotentialSolver(g, boundary_tol=None))
    es = build_sources([SourceConfig("mollified_ball", center=(1, 0, 0), radius=3.0),
                        SourceConfig("truncated_gaussian", center=(-2, 1, 0), radius=3.0)], g)
    s_em = eng.run(eng.seed(es.rho, es.j, "em"), 3)
    s_es = eng.run(eng.seed(es.rho, es.j, "electrostatic"), 3)
    for a, b in zip(s_em.D_coeffs, s_es.D_coeffs):
        np.testing.assert_allclose(a.values, b.values, rtol=0, atol=1e-13 * b.max_abs())
    ms = build_sources([SourceConfig("ring_current", major_radius=5.0, minor_radius=2.0,
                                     axis=(1, 0, 1))], g)
    m_em = eng.run(eng.seed(ms.rho, ms.j, "em"), 3)
    m_ms = eng.run(eng.seed(ms.rho, ms.j, "magnetostatic"), 3)
    for a, b in zip(m_em.H_coeffs, m_ms.H_coeffs):
        np.testing.assert_allclose(a.values, b.values, rtol=0, atol=1e-13 * b.max_abs())
    assert m_ms.H_coeffs[1].max_abs() > 0
    assert interior_max(curl(m_ms.H_coeffs[1]), margin=2) < 1e-12 * m_ms.H_coeffs[1].max_abs()


def test_mode_source_consistency(ball_ring):
    g, pair = ball_ring
    eng = SeriesEngine(g)
    with pytest.raises(ConfigError):
        eng.seed(pair.rho, pair.j, "electrostatic")
    with pytest.raises(ConfigError):
        eng.seed(pair.rho, pair.j, "magnetostatic")
    with pytest.raises(ConfigError):
        SeriesEngine(g, xy_method="guess")


def test_assemble(ball_ring):
    g, pair = ball_ring
    eng = SeriesEngine(g, PotentialSolver(g, boundary_tol=None))
    st = eng.run(eng.seed(pair.rho, pair.j), 2)
    D, H = assemble(st, 0.0)
    assert np.array_equal(D.values, st.D_coeffs[0].values)
    assert np.array_equal(H.values, st.H_coeffs[0].values)
    beta = 0.3
    D, H = assemble(st, beta)
    t = beta**4
    expect = st.D_coeffs[0].values + t * st.D_coeffs[1].values + t * t * st.D_coeffs[2].values
    np.testing.assert_allclose(D.values, expect, rtol=1e-14, atol=1e-18)
    D1, _ = assemble(st, beta, K=1)
    np.testing.assert_allclose(D1.values, expect - t * t * st.D_coeffs[2].values, atol=1e-15)
    with pytest.raises(ValueError):
        assemble(st, beta, K=3)


def test_reconstruct_limits(g8, rng):
    D = VectorField3(g8, 0.2 * rng.normal(size=(3,) + g8.dims))
    H = VectorField3(g8, 0.2 * rng.normal(size=(3,) + g8.dims))
    zero = VectorField3.zeros(g8)
    E, B = reconstruct_EB(D, H, 0.0)
    assert np.array_equal(E.values, D.values) and np.array_equal(B.values, H.values)
    beta = 0.8
    E, B = reconstruct_EB(D, zero, beta)
    dd = (D.values**2).sum(0)
    np.testing.assert_allclose(E.values, D.values / np.sqrt(1 + beta**4 * dd))
    assert B.max_abs() == 0.0
    E, B = reconstruct_EB(zero, H, beta)
    hh = (H.values**2).sum(0)
    np.testing.assert_allclose(B.values, H.values / np.sqrt(1 - beta**4 * hh))


def test_reconstruct_field_strength_violation(g8):
    H = np.zeros((3,) + g8.dims)
    H[0, 2, 3, 4] = 2.0
    with pytest.raises(FieldStrengthError) as info:
        reconstruct_EB(VectorField3.zeros(g8), VectorField3(g8, H), 1.0)
    assert info.value.nodes == [(2, 3, 4)]


def test_maxwell_limit_residuals(ball_ring):
    g, pair = ball_ring
    eng = SeriesEngine(g)
    st = eng.seed(pair.rho, pair.j)
    D, H = assemble(st, 0.0)
    E, B = reconstruct_EB(D, H, 0.0)
    res = residuals(E, B, D, H, pair.rho, pair.j)
    scale = 4 * np.pi * max(pair.rho.max_abs(), pair.j.max_abs())
    assert all(v < 1e-12 * scale for v in res.values())


def test_scaling_covariance():
    """Sources scaled by lam and beta^2 by 1/lam scale the assembled fields by lam."""
    g = GridSpec.centered(24, 1.0)
    lam = 3.0
    beta = 0.8
    fields = []
    for amp in (1.0, lam):
        pair = build_sources([SourceConfig("mollified_ball", radius=4.0, amplitude=amp),
                              SourceConfig("ring_current", major_radius=5.0, minor_radius=2.0,
                                           amplitude=0.5 * amp)], g)
        eng = SeriesEngine(g, PotentialSolver(g, boundary_tol=None))
        st = eng.run(eng.seed(pair.rho, pair.j), 3)
        b = beta if amp == 1.0 else beta / np.sqrt(lam)
        fields.append(assemble(st, b))
    (D1, H1), (D2, H2) = fields
    np.testing.assert_allclose(D2.values, lam * D1.values, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(H2.values, lam * H1.values, rtol=1e-11, atol=1e-14)


def test_norm_chain_report(ball_ring):
    g, pair = ball_ring
    eng = SeriesEngine(g, PotentialSolver(g, boundary_tol=None))
    st = eng.run(eng.seed(pair.rho, pair.j), 3)
    norms = coefficient_norms(st)
    rows = norm_chain(st, safety=2.0, norms=norms)
    assert [r["k"] for r in rows] == [0, 1, 2, 3]
    assert rows[0]["ok"]
    assert all(r["N_k"] == n["N"] for r, n in zip(rows, norms))
