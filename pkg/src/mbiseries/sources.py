"""Regular, compactly supported charge and current densities.

Charge profiles are sampled from closed forms and rescaled so that the grid
quadrature ``sum(rho) h^3`` equals the requested total charge.  Ring currents
are built as the discrete curl of a compactly supported vector potential, so
they are divergence-free to round-off and vanish outside their tube.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, SupportError
from .grid import GridSpec, ScalarField, VectorField3, curl, divergence, interior_max, proxy_norm
from .potential import project_solenoidal

log = logging.getLogger(__name__)

CHARGE_KINDS = ("mollified_ball", "truncated_gaussian")
KINDS = CHARGE_KINDS + ("ring_current", "superposition")
SUPPORT_MARGIN = 2
GAUSSIAN_CUT = 4.0  # truncation radius in units of sigma


@dataclass
class SourceConfig:
    """Declarative description of one source.

    ``radius`` is the support radius of a charge profile (for the truncated
    Gaussian, sigma = radius / 4).  Rings use ``major_radius``,
    ``minor_radius`` and the unit normal ``axis``; ``amplitude`` is the total
    charge or the loop current.
    """

    kind: str
    center: tuple = (0.0, 0.0, 0.0)
    radius: float | None = None
    amplitude: float = 1.0
    axis: tuple = (0.0, 0.0, 1.0)
    major_radius: float | None = None
    minor_radius: float | None = None
    children: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown source kind {self.kind!r}; expected one of {KINDS}")
        self.center = tuple(float(c) for c in self.center)
        self.children = [c if isinstance(c, SourceConfig) else SourceConfig.from_dict(c)
                         for c in self.children]
        if self.kind in CHARGE_KINDS:
            if self.radius is None or not self.radius > 0:
                raise ConfigError(f"{self.kind} needs a positive radius, got {self.radius!r}")
        elif self.kind == "ring_current":
            a, b = self.major_radius, self.minor_radius
            if a is None or b is None or not (0 < b < a):
                raise ConfigError(f"ring needs 0 < minor_radius < major_radius, got {b!r}, {a!r}")
            n = np.asarray(self.axis, dtype=float)
            norm = np.linalg.norm(n)
            if n.shape != (3,) or not norm > 0:
                raise ConfigError(f"ring axis must be a non-zero 3-vector, got {self.axis!r}")
            self.axis = tuple(n / norm)
        elif not self.children:
            raise ConfigError("superposition needs at least one child")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.setdefault("kind", "mollified_ball")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown source fields {sorted(extra)}")
        return cls(**d)

    def to_dict(self):
        out = {"kind": self.kind, "center": list(self.center), "amplitude": self.amplitude}
        if self.kind in CHARGE_KINDS:
            out["radius"] = self.radius
        elif self.kind == "ring_current":
            out.update(axis=list(self.axis), major_radius=self.major_radius,
                       minor_radius=self.minor_radius)
        else:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def leaves(self):
        if self.kind == "superposition":
            for c in self.children:
                yield from c.leaves()
        else:
            yield self

    def half_extent(self):
        """Half-width of the axis-aligned bounding box of the support."""
        if self.kind in CHARGE_KINDS:
            return np.full(3, self.radius)
        n = np.asarray(self.axis)
        return self.major_radius * np.sqrt(np.clip(1.0 - n**2, 0.0, None)) + self.minor_radius

    def check_fits(self, grid: GridSpec):
        for leaf in self.leaves():
            c = np.asarray(leaf.center)
            ext = leaf.half_extent()
            lo = np.asarray(grid.origin) + SUPPORT_MARGIN * grid.spacing
            hi = np.asarray(grid.origin) + (np.asarray(grid.dims) - 1 - SUPPORT_MARGIN) * grid.spacing
            if leaf.kind == "ring_current":
                # the discrete curl widens the support by one cell
                ext = ext + grid.spacing
            if np.any(c - ext < lo) or np.any(c + ext > hi):
                raise SupportError(
                    f"{leaf.kind} at {leaf.center} does not fit inside the grid with a "
                    f"{SUPPORT_MARGIN}-cell margin")


@dataclass
class SourcePair:
    rho: ScalarField
    j: VectorField3
    rho_total: float
    j_div_residual: float
    j_div_residual_before: float = 0.0

    def to_dict(self):
        return {
            "rho_total": self.rho_total,
            "j_div_residual": self.j_div_residual,
            "j_div_residual_before": self.j_div_residual_before,
            "rho_max": self.rho.max_abs(),
            "j_max": self.j.max_abs(),
        }


def mollified_ball_total(radius, peak=1.0):
    """Exact integral of ``peak * (1 - (r/R)^2)^2`` over the ball of radius R."""
    return peak * 32.0 * math.pi * radius**3 / 105.0


def _charge_profile(cfg: SourceConfig, grid: GridSpec):
    x, y, z = grid.coords()
    c = cfg.center
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    R = cfg.radius
    inside = r2 < R * R
    prof = np.zeros(grid.dims)
    if cfg.kind == "mollified_ball":
        prof[inside] = (1.0 - r2[inside] / (R * R)) ** 2
    else:
        sigma = R / GAUSSIAN_CUT
        prof[inside] = np.exp(-r2[inside] / (2 * sigma**2)) - math.exp(-GAUSSIAN_CUT**2 / 2)
    return prof


def build_charge_density(cfg: SourceConfig, grid: GridSpec) -> ScalarField:
    """Sample ``rho`` with grid quadrature total equal to ``cfg.amplitude``."""
    cfg.check_fits(grid)
    if cfg.kind == "ring_current":
        raise ConfigError("a ring_current carries no charge density")
    rho = np.zeros(grid.dims)
    for leaf in cfg.leaves():
        if leaf.kind not in CHARGE_KINDS or leaf.amplitude == 0.0:
            continue
        prof = _charge_profile(leaf, grid)
        mass = prof.sum() * grid.cell_volume
        if mass <= 0.0:
            raise SupportError(f"{leaf.kind} of radius {leaf.radius} covers no grid node")
        rho += leaf.amplitude * prof / mass
    return ScalarField(grid, rho)


def _cap_integral(u, b, n):
    """``int_{-b}^u (b^2 - t^2)^(n/2) dt`` for odd ``n`` by the usual reduction formula."""
    u = np.clip(u, -b, b)
    w = b * b - u * u
    if n == 1:
        return 0.5 * u * np.sqrt(w) + 0.5 * b * b * (np.arcsin(u / b) + 0.5 * math.pi)
    return u * w ** (n / 2) / (n + 1) + n * b * b / (n + 1) * _cap_integral(u, b, n - 2)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _ring_potential(cfg: SourceConfig, grid: GridSpec) -> np.ndarray:
    """Compactly supported vector potential whose discrete curl is the ring current.

    Away from the hole, ``A = F(r, s) n`` with ``F(r, s) = int_r^inf j_phi dr'``
    for the tube profile ``j_phi = I (1 - rho^2/b^2)^2 / (pi b^2 / 3)``; the
    integral is a quintic in ``r``.  Inside the hole ``F`` depends on ``s``
    alone, where the continuum curl vanishes but the discrete one does not
    for a tilted axis.  There ``F n`` is blended (inside the tube) into the
    exact discrete gradient of ``Psi(s) = int^s F``, so the discrete curl
    vanishes identically outside the tube.
    """
    n = np.asarray(cfg.axis)
    a, b, current = cfg.major_radius, cfg.minor_radius, cfg.amplitude
    x, y, z = grid.coords()
    d = np.stack([x - cfg.center[0], y - cfg.center[1], z - cfg.center[2]])
    s = np.einsum("i,i...->...", n, d)
    r = np.sqrt(np.maximum(np.sum(d**2, axis=0) - s**2, 0.0))
    c2 = np.maximum(b * b - s * s, 0.0)
    c = np.sqrt(c2)
    u0 = np.clip(r - a, -c, c)

    def prim(u):
        return c2 * c2 * u - (2.0 / 3.0) * c2 * u**3 + u**5 / 5.0

    scale = current / (math.pi * b * b / 3.0) / b**4
    F = (prim(c) - prim(u0)) * scale
    A = F[None] * n[:, None, None, None]
    if np.count_nonzero(n) > 1:
        flux = 2.0 * prim(c) * scale
        psi = (16.0 / 15.0) * scale * _cap_integral(s, b, 5)
        grad_psi = np.stack([np.gradient(psi, grid.spacing, axis=i, edge_order=2) for i in range(3)])
        with np.errstate(divide="ignore", invalid="ignore"):
            kappa = np.where(c > 0, _smoothstep((a + c - r) / (2 * c)), (r < a).astype(float))
        A += kappa[None] * (grad_psi - flux[None] * n[:, None, None, None])
    return A


def build_current_density(cfg: SourceConfig, grid: GridSpec) -> VectorField3:
    """Azimuthal current of every ring leaf; charge leaves contribute nothing."""
    cfg.check_fits(grid)
    if cfg.kind in CHARGE_KINDS:
        raise ConfigError(f"{cfg.kind} carries no current density")
    A = np.zeros((3,) + grid.dims)
    for leaf in cfg.leaves():
        if leaf.kind == "ring_current" and leaf.amplitude != 0.0:
            A += _ring_potential(leaf, grid)
    return curl(VectorField3(grid, A))


def div_residual(j: VectorField3) -> float:
    return interior_max(divergence(j), margin=2)


def solenoidalize(j: VectorField3, solver=None) -> VectorField3:
    """Solenoidal part of a user-supplied current density.

    Logs a warning when the projection moves ``j`` by more than 1% in proxy
    norm, which signals an inconsistent input.
    """
    pj = project_solenoidal(j, solver)
    base = proxy_norm(j).total
    change = proxy_norm(pj - j).total
    if base > 0 and change > 0.01 * base:
        log.warning("projection changed the current density by %.2f%% in proxy norm",
                    100.0 * change / base)
    return pj


def div_tolerance(j: VectorField3, factor=1e-8) -> float:
    return factor * j.max_abs() / j.grid.spacing


def build_sources(configs, grid: GridSpec, solver=None, project=False) -> SourcePair:
    """Assemble ``rho`` and ``j`` from a list of source configurations.

    Ring currents are solenoidal by construction; ``project=True`` forces the
    solenoidal projection anyway.
    """
    top = SourceConfig("superposition", children=list(configs)) if configs else None
    rho = ScalarField.zeros(grid)
    j = VectorField3.zeros(grid)
    if top is not None:
        top.check_fits(grid)
        if any(leaf.kind in CHARGE_KINDS for leaf in top.leaves()):
            rho = build_charge_density(top, grid)
        if any(leaf.kind == "ring_current" for leaf in top.leaves()):
            j = build_current_density(top, grid)
    return pair_from_fields(rho, j, solver, project=project)


def pair_from_fields(rho: ScalarField, j: VectorField3, solver=None, project=True) -> SourcePair:
    before = div_residual(j)
    if project:
        j = solenoidalize(j, solver)
    after = div_residual(j)
    tol = div_tolerance(j)
    if after > tol:
        raise NumericalError(f"current density divergence {after:.3e} exceeds tolerance {tol:.3e}")
    return SourcePair(rho, j, float(rho.values.sum() * rho.grid.cell_volume), after, before)
