"""Perturbation series in beta^4 for the static Born-Infeld field equations.

With ``t = beta^4`` the displacement and magnetic fields are expanded as
``D = sum_k t^k D^(k)`` and ``H = sum_k t^k H^(k)``, starting from the
Coulomb field ``D^(0)`` and the Ampere field ``H^(0)``.  Writing the aether
law as ``E = -X D - Y H`` and ``B = -X H + Y D`` with

    X = -1/sqrt(1 + z),   Y = t (D.H)/sqrt(1 + z),   z = t(|D|^2 - |H|^2) - t^2 (D.H)^2,

the coefficient fields obey

    D^(k) = P sum_{h=1}^k (X^(h) D^(k-h) + Y^(h) H^(k-h))
    H^(k) = Q sum_{h=1}^k (X^(h) H^(k-h) - Y^(h) D^(k-h))

where ``P`` and ``Q`` are the solenoidal and irrotational projectors.  The
scalar coefficients ``X^(h)``, ``Y^(h)`` are computed either by expanding
``(1+z)^(-1/2)`` term by term over ordered multi-indices (the combinatorial
path) or by truncated power-series arithmetic at every node (the series
path).  Both only involve orders below ``h``.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .convergence import MODES, compositions, maclaurin_coeffs
from .errors import ConfigError, FieldStrengthError
from .grid import (ScalarField, VectorField3, curl, divergence, interior_max, proxy_norm)
from .potential import (FOUR_PI, ampere_field, coulomb_field, default_solver,
                        project_irrotational, project_solenoidal)
from .powerseries import TruncatedSeries

log = logging.getLogger(__name__)

# orders up to which the combinatorial path is the default
COMBINATORIAL_LIMIT = {"em": 8, "electrostatic": 12, "magnetostatic": 12}
RADICAND_MARGIN = 1e-12


@dataclass
class MaclaurinCoeffs:
    """Taylor coefficients ``M_j`` of ``1/sqrt(1+z)`` as exact fractions."""

    M: list

    @classmethod
    def up_to(cls, n):
        return cls(maclaurin_coeffs(n))

    def __getitem__(self, j):
        return self.M[j]


@dataclass
class SeriesState:
    """Stored coefficient fields through order ``order``.

    ``Y_coeffs[0]`` is the zero field so that ``Y_coeffs[h]`` is ``Y^(h)``.
    """

    mode: str
    D_coeffs: list
    H_coeffs: list
    X_coeffs: list
    Y_coeffs: list
    diagnostics: list = field(default_factory=list)

    @property
    def order(self):
        return len(self.D_coeffs) - 1

    @property
    def grid(self):
        return self.D_coeffs[0].grid

    def __post_init__(self):
        n = len(self.D_coeffs)
        if not (len(self.H_coeffs) == len(self.X_coeffs) == len(self.Y_coeffs) == n):
            raise ValueError("coefficient lists must have equal length")


class _DotCache:
    """Memoized nodewise dot products between coefficient fields."""

    def __init__(self, state: SeriesState):
        self.state = state
        self.cache = {}

    def _vec(self, kind, k):
        D, H = self.state.D_coeffs, self.state.H_coeffs
        if kind == "D":
            return D[k].values
        if kind == "H":
            return H[k].values
        if kind == "D-H":
            return D[k].values - H[k].values
        return D[k].values + H[k].values

    def get(self, left, a, right, b):
        key = (left, a, right, b)
        if key not in self.cache:
            self.cache[key] = np.einsum("i...,i...->...", self._vec(left, a), self._vec(right, b))
        return self.cache[key]


def _check_available(state, h):
    if h < 1:
        raise ValueError(f"order must be at least 1, got {h}")
    if state.order < h - 1:
        raise ValueError(f"order {h} needs coefficients through {h - 1}, state has {state.order}")


def compute_Z(h: int, j: int, l: int, state: SeriesState, cache: _DotCache | None = None) -> ScalarField:
    """``Z_{h,j,l}``: sum over ordered ``a`` in N^(2l), ``b`` in N^(4(j-l))
    with ``|a| + |b| = h + l - 2j`` of
    ``prod_i (D-H)^(a_{2i-1}).(D+H)^(a_{2i}) * prod_i D^(b_{2i-1}).H^(b_{2i})``.

    Tuples that differ only by reordering the factor pairs give the same
    product, so each distinct multiset of pairs is evaluated once and weighted
    by its multiplicity.
    """
    if not 0 <= l <= j <= h:
        raise ValueError(f"need 0 <= l <= j <= h, got h={h}, j={j}, l={l}")
    _check_available(state, h)
    cache = cache or _DotCache(state)
    total = h + l - 2 * j
    out = np.zeros(state.grid.dims)
    if total < 0:
        return ScalarField(state.grid, out, check=False)
    counts = Counter()
    for comp in compositions(total, 2 * l + 4 * (j - l)):
        s_pairs = tuple(sorted((comp[2 * i], comp[2 * i + 1]) for i in range(l)))
        rest = comp[2 * l:]
        p_pairs = tuple(sorted((rest[2 * i], rest[2 * i + 1]) for i in range(2 * (j - l))))
        counts[(s_pairs, p_pairs)] += 1
    for (s_pairs, p_pairs), mult in sorted(counts.items()):
        term = np.full(state.grid.dims, float(mult))
        for a1, a2 in s_pairs:
            term *= cache.get("D-H", a1, "D+H", a2)
        for b1, b2 in p_pairs:
            term *= cache.get("D", b1, "H", b2)
        out += term
    return ScalarField(state.grid, out, check=False)


def compute_X(h: int, state: SeriesState, cache: _DotCache | None = None) -> ScalarField:
    """``X^(h) = -sum_j M_j sum_l (-1)^(j-l) binom(j,l) Z_{h,j,l}``; ``X^(0) = -1``."""
    if h == 0:
        return ScalarField(state.grid, -np.ones(state.grid.dims), check=False)
    _check_available(state, h)
    cache = cache or _DotCache(state)
    M = maclaurin_coeffs(h)
    out = np.zeros(state.grid.dims)
    for j in range(1, h + 1):
        inner = np.zeros(state.grid.dims)
        for l in range(j + 1):
            if h + l - 2 * j < 0:
                continue
            w = (-1) ** (j - l) * comb(j, l)
            inner += w * compute_Z(h, j, l, state, cache).values
        out -= float(M[j]) * inner
    return ScalarField(state.grid, out, check=False)


def compute_Y(h: int, state: SeriesState, X_coeffs=None, cache: _DotCache | None = None) -> ScalarField:
    """``Y^(h) = -sum_{g<h} X^(h-1-g) sum_{a1+a2=g} D^(a1).H^(a2)``.

    ``X_coeffs`` defaults to ``state.X_coeffs`` and must reach order ``h-1``.
    """
    if h == 0:
        return ScalarField.zeros(state.grid)
    _check_available(state, h)
    cache = cache or _DotCache(state)
    X = state.X_coeffs if X_coeffs is None else X_coeffs
    out = np.zeros(state.grid.dims)
    for g in range(h):
        p = np.zeros(state.grid.dims)
        for a1 in range(g + 1):
            p += cache.get("D", a1, "H", g - a1)
        out -= X[h - 1 - g].values * p
    return ScalarField(state.grid, out, check=False)


def series_oracle_XY(state: SeriesState, order: int):
    """``X^(0..order)`` and ``Y^(0..order)`` by nodewise truncated-series algebra.

    Builds the series ``s = |D|^2 - |H|^2`` and ``p = D.H`` in ``t`` from the
    stored coefficient fields, then expands ``-1/sqrt(1 + t s - t^2 p^2)``
    and ``t p / sqrt(...)`` with Newton iterations on truncated series.
    """
    if state.order < order - 1:
        raise ValueError(f"order {order} needs coefficients through {order - 1}")
    grid = state.grid
    n = max(order, 1)
    D = [c.values for c in state.D_coeffs[:n]]
    H = [c.values for c in state.H_coeffs[:n]]

    def cauchy_dot(U, V, k):
        return sum(np.einsum("i...,i...->...", U[a], V[k - a]) for a in range(k + 1))

    zero = np.zeros(grid.dims)
    s = TruncatedSeries([cauchy_dot(D, D, k) - cauchy_dot(H, H, k) for k in range(n)] + [zero])
    p = TruncatedSeries([cauchy_dot(D, H, k) for k in range(n)] + [zero])
    z = s.shift(1) - (p * p).shift(2)
    one = TruncatedSeries([np.ones(grid.dims)] + [zero] * n)
    w = (one + z).rsqrt()
    y = (p * w).shift(1)
    X = [ScalarField(grid, -c, check=False) for c in w.coeffs[: order + 1]]
    Y = [ScalarField(grid, np.asarray(c, dtype=float) + zero, check=False) for c in y.coeffs[: order + 1]]
    return X, Y


def _single_field_X(h, fields, signed: bool, cache):
    """``-sum_j c_j sum_{|l|_(2j) = h-j} prod F^(l).F^(l')`` for one field family.

    ``c_j = M_j`` (electric) or ``|M_j|`` (magnetic).
    """
    M = maclaurin_coeffs(h)
    grid = fields[0].grid
    out = np.zeros(grid.dims)
    for j in range(1, h + 1):
        counts = Counter()
        for comp in compositions(h - j, 2 * j):
            counts[tuple(sorted((comp[2 * i], comp[2 * i + 1]) for i in range(j)))] += 1
        inner = np.zeros(grid.dims)
        for pairs, mult in sorted(counts.items()):
            term = np.full(grid.dims, float(mult))
            for a, b in pairs:
                key = (min(a, b), max(a, b))
                if key not in cache:
                    cache[key] = np.einsum("i...,i...->...", fields[a].values, fields[b].values)
                term *= cache[key]
            inner += term
        c = float(M[j]) if signed else abs(float(M[j]))
        out -= c * inner
    return out


@dataclass
class StepDiagnostics:
    k: int
    boundary_ratio_D: float
    boundary_ratio_H: float
    seconds: float
    xy_method: str

    def to_dict(self):
        return dict(self.__dict__)


class SeriesEngine:
    """Drives the recursion on one grid with one potential solver.

    ``xy_method`` is ``"combinatorial"``, ``"series"`` or ``"auto"`` (the
    combinatorial path up to the order limits in ``COMBINATORIAL_LIMIT``).
    """

    def __init__(self, grid, solver=None, xy_method="auto"):
        if xy_method not in ("auto", "combinatorial", "series"):
            raise ConfigError(f"unknown xy_method {xy_method!r}")
        self.grid = grid
        self.solver = solver or default_solver(grid)
        self.xy_method = xy_method

    def seed(self, rho: ScalarField, j: VectorField3, mode="em") -> SeriesState:
        """Order-zero state: Coulomb field of ``rho`` and Ampere field of ``j``."""
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
        if mode == "electrostatic" and j.max_abs() > 0:
            raise ConfigError("electrostatic mode requires j = 0")
        if mode == "magnetostatic" and rho.max_abs() > 0:
            raise ConfigError("magnetostatic mode requires rho = 0")
        D0 = coulomb_field(rho, self.solver) if rho.max_abs() > 0 else VectorField3.zeros(self.grid)
        H0 = ampere_field(j, self.solver) if j.max_abs() > 0 else VectorField3.zeros(self.grid)
        return self.seed_fields(D0, H0, mode)

    def seed_fields(self, D0: VectorField3, H0: VectorField3, mode="em") -> SeriesState:
        X0 = ScalarField(self.grid, -np.ones(self.grid.dims), check=False)
        return SeriesState(mode, [D0], [H0], [X0], [ScalarField.zeros(self.grid)])

    def _method(self, state, k):
        if self.xy_method != "auto":
            return self.xy_method
        return "combinatorial" if k <= COMBINATORIAL_LIMIT[state.mode] else "series"

    def _project(self, v, which):
        if not np.any(v.values):
            return v, 0.0
        proj = project_solenoidal if which == "P" else project_irrotational
        return proj(v, self.solver, with_diagnostic=True)

    def step(self, state: SeriesState) -> SeriesState:
        return {"em": self.step_em, "electrostatic": self.step_electrostatic,
                "magnetostatic": self.step_magnetostatic}[state.mode](state)

    def _next_XY(self, state, k, method):
        if method == "series":
            X, Y = series_oracle_XY(state, k)
            return X[k], Y[k]
        cache = _DotCache(state)
        Xk = compute_X(k, state, cache)
        Yk = compute_Y(k, state, cache=cache)
        return Xk, Yk

    def step_em(self, state: SeriesState) -> SeriesState:
        """Append ``X^(k)``, ``Y^(k)``, ``D^(k)`` and ``H^(k)`` for ``k = order + 1``."""
        t0 = time.perf_counter()
        k = state.order + 1
        method = self._method(state, k)
        Xk, Yk = self._next_XY(state, k, method)
        X = state.X_coeffs + [Xk]
        Y = state.Y_coeffs + [Yk]
        D, H = state.D_coeffs, state.H_coeffs
        vd = np.zeros((3,) + self.grid.dims)
        vh = np.zeros((3,) + self.grid.dims)
        for h in range(1, k + 1):
            x, y = X[h].values[None], Y[h].values[None]
            vd += x * D[k - h].values + y * H[k - h].values
            vh += x * H[k - h].values - y * D[k - h].values
        Dk, rd = self._project(VectorField3(self.grid, vd, check=False), "P")
        Hk, rh = self._project(VectorField3(self.grid, vh, check=False), "Q")
        diag = StepDiagnostics(k, rd, rh, time.perf_counter() - t0, method)
        return SeriesState(state.mode, D + [Dk], H + [Hk], X, Y, state.diagnostics + [diag])

    def _single_step(self, state, electric: bool):
        t0 = time.perf_counter()
        k = state.order + 1
        fields = state.D_coeffs if electric else state.H_coeffs
        if self._method(state, k) == "series":
            X, _ = series_oracle_XY(state, k)
            Xk = X[k].values
            method = "series"
        else:
            Xk = _single_field_X(k, fields, electric, {})
            method = "combinatorial"
        Xs = state.X_coeffs + [ScalarField(self.grid, Xk, check=False)]
        v = np.zeros((3,) + self.grid.dims)
        for h in range(1, k + 1):
            v += Xs[h].values[None] * fields[k - h].values
        new, ratio = self._project(VectorField3(self.grid, v, check=False), "P" if electric else "Q")
        zero = VectorField3.zeros(self.grid)
        Ys = state.Y_coeffs + [ScalarField.zeros(self.grid)]
        if electric:
            D, H = state.D_coeffs + [new], state.H_coeffs + [zero]
            diag = StepDiagnostics(k, ratio, 0.0, time.perf_counter() - t0, method)
        else:
            D, H = state.D_coeffs + [zero], state.H_coeffs + [new]
            diag = StepDiagnostics(k, 0.0, ratio, time.perf_counter() - t0, method)
        return SeriesState(state.mode, D, H, Xs, Ys, state.diagnostics + [diag])

    def step_electrostatic(self, state: SeriesState) -> SeriesState:
        """``D^(k) = P V^(k)`` with ``V^(k) = -sum_h D^(k-h) sum_j M_j sum prod D.D``."""
        return self._single_step(state, electric=True)

    def step_magnetostatic(self, state: SeriesState) -> SeriesState:
        """``H^(k) = Q U^(k)`` with ``U^(k) = -sum_h H^(k-h) sum_j |M_j| sum prod H.H``."""
        return self._single_step(state, electric=False)

    def run(self, state: SeriesState, K: int) -> SeriesState:
        while state.order < K:
            state = self.step(state)
            log.debug("order %d done in %.3fs", state.order, state.diagnostics[-1].seconds)
        return state


def assemble(state: SeriesState, beta: float, K: int | None = None):
    """Partial sums ``D_C + sum_{k<=K} beta^(4k) D^(k)`` and the same for ``H``."""
    K = state.order if K is None else K
    if K > state.order:
        raise ValueError(f"state only holds orders through {state.order}")
    t = beta**4
    D = np.zeros((3,) + state.grid.dims)
    H = np.zeros((3,) + state.grid.dims)
    for k in range(K, -1, -1):
        D = D * t + state.D_coeffs[k].values
        H = H * t + state.H_coeffs[k].values
    return VectorField3(state.grid, D, check=False), VectorField3(state.grid, H, check=False)


def radicand(D: VectorField3, H: VectorField3, beta: float) -> np.ndarray:
    t = beta**4
    dd = np.einsum("i...,i...->...", D.values, D.values)
    hh = np.einsum("i...,i...->...", H.values, H.values)
    dh = np.einsum("i...,i...->...", D.values, H.values)
    return 1.0 + t * (dd - hh) - t * t * dh * dh


def reconstruct_EB(D: VectorField3, H: VectorField3, beta: float):
    """``E = (D - beta^4 (D.H) H)/sqrt(rad)``, ``B = (H + beta^4 (D.H) D)/sqrt(rad)``.

    Raises :class:`FieldStrengthError` listing the nodes where the radicand
    ``1 + beta^4 (|D|^2 - |H|^2) - beta^8 (D.H)^2`` is not above the margin.
    """
    t = beta**4
    rad = radicand(D, H, beta)
    bad = rad <= RADICAND_MARGIN
    if np.any(bad):
        nodes = np.argwhere(bad)
        raise FieldStrengthError(
            f"field-strength bound violated at {len(nodes)} nodes (min radicand {rad.min():.3e})",
            nodes[:100])
    dh = np.einsum("i...,i...->...", D.values, H.values)[None]
    inv = 1.0 / np.sqrt(rad)[None]
    E = (D.values - t * dh * H.values) * inv
    B = (H.values + t * dh * D.values) * inv
    return VectorField3(D.grid, E, check=False), VectorField3(D.grid, B, check=False)


def residuals(E, B, D, H, rho, j, margin=2) -> dict:
    """Interior max norms of the four static field laws."""
    return {
        "div_D_minus_4pi_rho": interior_max(divergence(D) - rho * FOUR_PI, margin),
        "curl_H_minus_4pi_j": interior_max(curl(H) - j * FOUR_PI, margin),
        "curl_E": interior_max(curl(E), margin),
        "div_B": interior_max(divergence(B), margin),
    }


def coefficient_norms(state: SeriesState, alpha=0.5):
    """Proxy norms ``N^(k) = ||D^(k)|| + ||H^(k)||`` per order."""
    out = []
    for k in range(state.order + 1):
        nd = proxy_norm(state.D_coeffs[k], alpha).total
        nh = proxy_norm(state.H_coeffs[k], alpha).total
        out.append({"k": k, "norm_D": nd, "norm_H": nh, "N": nd + nh})
    return out


def norm_chain(state: SeriesState, safety=2.0, alpha=0.5, norms=None):
    """Checks ``N^(k) <= R_k N^(2k+1) * safety`` per order with ``N = N^(0)``.

    The proxy norm is not the Hoelder norm of the estimates, so a failure
    here is a diagnostic rather than a contradiction.
    """
    from .convergence import majorant_sequence

    norms = norms or coefficient_norms(state, alpha)
    seq = majorant_sequence(max(30, state.order + 1), electrostatic=(state.mode != "em"))
    N = norms[0]["N"]
    rows = []
    for row in norms:
        k = row["k"]
        bound = float(seq.R[k]) * N ** (2 * k + 1) * safety
        rows.append({"k": k, "N_k": row["N"], "bound": bound, "ok": row["N"] <= bound})
    return rows
