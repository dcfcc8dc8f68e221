"""Free-space Newtonian potentials and the two Helmholtz projectors.

``newtonian_potential(f)`` approximates ``u(x) = int f(y)/|x-y| d^3y`` by a
discrete convolution ``u = sum_y W(x - y) f(y)`` over the grid.  Two kernels
are available:

``lattice`` (default)
    ``W`` is ``-4 pi`` times the free-space Green's function of the discrete
    Laplacian ``divergence(gradient(.))``.  That operator couples only nodes
    an even number of cells apart, so it splits into eight copies of the
    seven-point Laplacian with spacing ``2h`` and ``W`` vanishes at offsets with
    an odd component.  With this kernel ``-laplacian(u) == 4 pi f`` holds to
    round-off and the projectors below are exact discrete projectors.
``continuum``
    ``W(o) = h^3 / |o h|`` with the singular self cell replaced by the average
    of ``1/|x|`` over a cube of side ``h``.  Consistent with the continuum
    integral only to O(h^2).

Both kernels can be applied by direct summation or by a zero-padded FFT
convolution; the two routes agree to round-off.

The projectors drop their integrand (``div v`` or ``curl v``) on the two
outermost node layers.  There the one-sided stencils see a field cut off by
the box, and on the unbounded lattice those values would vanish for any
field that is already solenoidal (resp. curl-free).  The dropped share is
what ``boundary_mass_ratio`` reports.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.special import ive

from .errors import BoundaryTruncationError, ConfigError, SupportError
from .grid import GridSpec, ScalarField, VectorField3, curl, divergence, gradient, jacobian

FOUR_PI = 4.0 * math.pi
DEFAULT_BOUNDARY_TOL = 1e-3
BOUNDARY_WIDTH = 2


@lru_cache(maxsize=None)
def self_cell_constant(order: int = 64) -> float:
    """Average of ``1/|x|`` over the unit cube centred at the origin.

    The cube splits into six pyramids with apex at the origin; on each the
    radial integral is elementary, leaving a smooth 2D integral over a face
    that Gauss-Legendre handles to machine precision.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    s, t = np.meshgrid(x, x, indexing="ij")
    face = float(np.sum(np.outer(w, w) / np.sqrt(1.0 + s**2 + t**2)))
    return 0.75 * face


def _gauss_nodes_log(umin, umax, nodes_per_unit=2, order=12):
    npanel = int(math.ceil((umax - umin) * nodes_per_unit))
    edges = np.linspace(umin, umax, npanel + 1)
    x, wx = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    u = ((b - a) / 2 * x + (a + b) / 2).ravel()
    w = ((b - a) / 2 * wx).ravel()
    return u, w


@lru_cache(maxsize=8)
def lattice_green(m_max: int) -> np.ndarray:
    """Free-space Green's function of the unit-spacing seven-point Laplacian.

    Returns ``G[a, b, c]`` for ``0 <= a, b, c <= m_max`` with
    ``6 G(m) - sum_{nbrs} G(m') = delta_{m,0}`` and ``G -> 1/(4 pi |m|)``.
    Uses ``G(m) = int_0^inf prod_i ive(m_i, 2t) dt``: Gauss-Legendre panels in
    ``u = log t`` up to ``t = T`` plus the large-``t`` asymptotic tail.
    """
    t_max = 5e7
    u, wu = _gauss_nodes_log(-40.0, math.log(t_max))
    t = np.exp(u)
    table = np.array([ive(m, 2.0 * t) for m in range(m_max + 1)])
    w = t * wu
    G = np.empty((m_max + 1,) * 3)
    for a in range(m_max + 1):
        G[a] = np.einsum("t,bt,ct->bc", table[a] * w, table, table)
    m = np.arange(m_max + 1)
    c = (4.0 * m**2 - 1.0) / 16.0
    csum = c[:, None, None] + c[None, :, None] + c[None, None, :]
    G += FOUR_PI**-1.5 * (2.0 * t_max**-0.5 - csum * (2.0 / 3.0) * t_max**-1.5)
    G.setflags(write=False)
    return G


def kernel_weights(grid: GridSpec, kernel: str = "lattice") -> np.ndarray:
    """Convolution weights ``W`` over all offsets ``-(n-1)..(n-1)`` per axis.

    ``W`` already contains the cell volume, so ``u = sum W(x-y) f(y)``.
    """
    h = grid.spacing
    idx = [np.arange(-(n - 1), n) for n in grid.dims]
    ox, oy, oz = np.meshgrid(*idx, indexing="ij")
    if kernel == "lattice":
        m_max = max((n - 1) // 2 for n in grid.dims)
        G = lattice_green(m_max)
        even = (ox % 2 == 0) & (oy % 2 == 0) & (oz % 2 == 0)
        W = np.zeros(ox.shape)
        W[even] = 16.0 * math.pi * h**2 * G[np.abs(ox[even]) // 2, np.abs(oy[even]) // 2, np.abs(oz[even]) // 2]
        return W
    if kernel == "continuum":
        r = np.sqrt(ox**2 + oy**2 + oz**2).astype(float)
        r[r == 0] = 1.0 / self_cell_constant()
        return h**2 / r
    raise ConfigError(f"unknown kernel {kernel!r}")


def _abs_mass(values):
    vals = np.abs(values)
    while vals.ndim > 3:
        vals = vals.sum(axis=0)
    return vals


def boundary_mass_ratio(f, width=BOUNDARY_WIDTH, reference=None) -> float:
    """Share of the absolute mass of ``f`` carried by nodes within ``width`` cells of a face.

    The mass is divided by ``reference`` when given (projectors pass the
    absolute Jacobian mass of their input, so that integrands which cancel
    almost everywhere do not produce a spurious ratio near one).
    """
    vals = _abs_mass(f.values)
    total = vals.sum() if reference is None else reference
    if total == 0.0:
        return 0.0
    return float(vals[f.grid.boundary_mask(width)].sum() / total)


class PotentialSolver:
    """Applies the free-space convolution on one grid.

    ``method`` is ``fast_transform`` (zero-padded FFT) or ``direct_sum``.
    ``boundary_tol`` bounds the boundary mass ratio of every integrand handed
    to the projectors; ``None`` disables the check.
    """

    def __init__(self, grid: GridSpec, method="fast_transform", kernel="lattice",
                 boundary_tol=DEFAULT_BOUNDARY_TOL, workers=None):
        if method not in ("fast_transform", "direct_sum"):
            raise ConfigError(f"unknown potential method {method!r}")
        self.grid = grid
        self.method = method
        self.kernel = kernel
        self.boundary_tol = boundary_tol
        self.workers = workers
        self._weights = None
        self._kernel_hat = None
        self._extended = None

    def extended(self) -> "PotentialSolver":
        """Solver of the same kind on the grid grown by one node on every face."""
        if self._extended is None:
            g = self.grid
            dims = tuple(n + 2 for n in g.dims)
            ext = GridSpec(dims, g.spacing, tuple(o - g.spacing for o in g.origin),
                           max_cells=max(g.max_cells, math.prod(dims)))
            self._extended = PotentialSolver(ext, self.method, self.kernel, self.boundary_tol,
                                             self.workers)
        return self._extended

    @property
    def self_cell_value(self) -> float:
        """Weight ``W(0)`` divided by ``h^3``, i.e. the kernel value at the self cell."""
        return float(self.weights[tuple(n - 1 for n in self.grid.dims)] / self.grid.cell_volume)

    @property
    def weights(self):
        if self._weights is None:
            self._weights = kernel_weights(self.grid, self.kernel)
        return self._weights

    def _padded_shape(self):
        return tuple(2 * n for n in self.grid.dims)

    def _kernel_transform(self):
        if self._kernel_hat is None:
            W = self.weights
            pad = np.zeros(self._padded_shape())
            # circular layout: offset o lives at index o mod 2n
            nx, ny, nz = self.grid.dims
            ix = np.r_[0:nx, -(nx - 1):0] % (2 * nx)
            iy = np.r_[0:ny, -(ny - 1):0] % (2 * ny)
            iz = np.r_[0:nz, -(nz - 1):0] % (2 * nz)
            wx = np.r_[nx - 1:2 * nx - 1, 0:nx - 1]
            wy = np.r_[ny - 1:2 * ny - 1, 0:ny - 1]
            wz = np.r_[nz - 1:2 * nz - 1, 0:nz - 1]
            pad[np.ix_(ix, iy, iz)] = W[np.ix_(wx, wy, wz)]
            self._kernel_hat = scipy.fft.rfftn(pad, workers=self.workers)
        return self._kernel_hat

    def _convolve_fft(self, values):
        shape = self._padded_shape()
        f_hat = scipy.fft.rfftn(values, s=shape, workers=self.workers)
        u = scipy.fft.irfftn(f_hat * self._kernel_transform(), s=shape, workers=self.workers)
        nx, ny, nz = self.grid.dims
        return u[:nx, :ny, :nz]

    def _convolve_direct(self, values, chunk_elems=4_000_000):
        dims = np.array(self.grid.dims)
        W = self.weights
        src = np.argwhere(values != 0.0)
        out = np.zeros(values.size)
        if len(src) == 0:
            return out.reshape(values.shape)
        fsrc = values[tuple(src.T)]
        tgt = np.indices(values.shape).reshape(3, -1).T
        step = max(1, chunk_elems // len(src))
        for start in range(0, len(tgt), step):
            t = tgt[start:start + step]
            off = t[:, None, :] - src[None, :, :] + (dims - 1)
            out[start:start + step] = W[off[..., 0], off[..., 1], off[..., 2]] @ fsrc
        return out.reshape(values.shape)

    def convolve(self, values: np.ndarray) -> np.ndarray:
        if self.method == "fast_transform":
            return self._convolve_fft(values)
        return self._convolve_direct(values)

    def check_boundary(self, f, what, reference=None):
        ratio = boundary_mass_ratio(f, reference=reference)
        if self.boundary_tol is not None and ratio > self.boundary_tol:
            raise BoundaryTruncationError(
                f"{what}: {ratio:.2e} of the integrand lies within {BOUNDARY_WIDTH} cells "
                f"of the boundary (limit {self.boundary_tol:.1e})", ratio)
        return ratio


_DEFAULT_SOLVERS = {}


def default_solver(grid: GridSpec) -> PotentialSolver:
    solver = _DEFAULT_SOLVERS.get(grid)
    if solver is None:
        solver = _DEFAULT_SOLVERS[grid] = PotentialSolver(grid)
    return solver


def _solver(grid, solver):
    if solver is None:
        return default_solver(grid)
    if solver.grid != grid:
        raise ValueError("solver was built for a different grid")
    return solver


def _require_compact(f, solver):
    if solver.boundary_tol is not None:
        ratio = boundary_mass_ratio(f)
        if ratio > solver.boundary_tol:
            raise SupportError(f"source of the Newtonian potential touches the grid boundary "
                               f"(boundary mass ratio {ratio:.2e})")


def newtonian_potential(f: ScalarField, solver: PotentialSolver | None = None,
                        require_compact=True) -> ScalarField:
    """Discrete ``int f(y)/|x-y| d^3y``.

    With ``require_compact`` the boundary mass ratio of the source may not
    exceed ``solver.boundary_tol``; sources outside the box are invisible to
    the convolution, so a source reaching the boundary means a truncated
    free-space problem.
    """
    solver = _solver(f.grid, solver)
    if require_compact:
        _require_compact(f, solver)
    return ScalarField(f.grid, solver.convolve(f.values), check=False)


def _halo_potentials(values: np.ndarray, solver: PotentialSolver) -> VectorField3 | ScalarField:
    """Convolve each component and return it on the grid grown by one node layer.

    Differencing the grown potential with central stencils and cropping gives
    the unbounded-lattice derivative on the outermost nodes of the box, where
    ``np.gradient`` would otherwise fall back to one-sided stencils.
    """
    ext = solver.extended()
    comps = values[None] if values.ndim == 3 else values
    out = np.stack([ext.convolve(np.pad(c, 1)) for c in comps])
    if values.ndim == 3:
        return ScalarField(ext.grid, out[0], check=False)
    return VectorField3(ext.grid, out, check=False)


def _crop(v: VectorField3, grid: GridSpec) -> VectorField3:
    return VectorField3(grid, np.ascontiguousarray(v.values[:, 1:-1, 1:-1, 1:-1]), check=False)


def coulomb_field(rho: ScalarField, solver=None) -> VectorField3:
    """``D_C = -grad int rho(y)/|x-y| d^3y``."""
    solver = _solver(rho.grid, solver)
    _require_compact(rho, solver)
    return -_crop(gradient(_halo_potentials(rho.values, solver)), rho.grid)


def ampere_field(j: VectorField3, solver=None) -> VectorField3:
    """``H_A = curl int j(y)/|x-y| d^3y``."""
    solver = _solver(j.grid, solver)
    _require_compact(j, solver)
    return _crop(curl(_halo_potentials(j.values, solver)), j.grid)


def _gradient_part(v: VectorField3, solver, label):
    """``-grad int (div v)(y) / (4 pi |x-y|) d^3y`` and the boundary-mass ratio."""
    src = divergence(v)
    ratio = solver.check_boundary(src, label, _abs_mass(jacobian(v)).sum())
    src.values[src.grid.boundary_mask(BOUNDARY_WIDTH)] = 0.0
    phi = _halo_potentials(src.values, solver)
    return _crop(gradient(phi), v.grid) * (-1.0 / FOUR_PI), ratio


def project_solenoidal(v: VectorField3, solver=None, with_diagnostic=False):
    """Divergence-free part ``v + grad int (div v)(y) / (4 pi |x-y|) d^3y``."""
    solver = _solver(v.grid, solver)
    grad_part, ratio = _gradient_part(v, solver, "solenoidal projection")
    out = v - grad_part
    return (out, ratio) if with_diagnostic else out


def project_irrotational(v: VectorField3, solver=None, with_diagnostic=False):
    """Curl-free part of ``v``.

    In the continuum this equals ``v - curl int (curl v)(y) / (4 pi |x-y|) d^3y``.
    The gradient form is used because central differences make it exactly
    curl-free and exactly complementary to :func:`project_solenoidal`.
    """
    solver = _solver(v.grid, solver)
    out, ratio = _gradient_part(v, solver, "irrotational projection")
    return (out, ratio) if with_diagnostic else out
