"""Uniform 3D grids, sampled scalar/vector fields and finite-difference operators.

All derivatives are second-order central differences on a collocated grid,
with second-order one-sided stencils on the outermost layer of nodes so that
every operator returns a field defined everywhere.  Central differences
commute with each other, which makes ``curl(gradient(f))`` and
``divergence(curl(v))`` vanish to round-off at nodes at least two cells away
from the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, NumericalError

DEFAULT_MAX_CELLS = 2**24
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Node layout ``origin + spacing * (i, j, k)`` with ``dims`` nodes per axis."""

    dims: tuple
    spacing: float
    origin: tuple = (0.0, 0.0, 0.0)
    max_cells: int = field(default=DEFAULT_MAX_CELLS, compare=False)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3:
            raise ConfigError(f"grid dims must have three entries, got {self.dims!r}")
        if min(dims) < 8:
            raise ConfigError(f"grid needs at least 8 nodes per axis, got {dims}")
        if not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ConfigError(f"grid spacing must be finite and positive, got {self.spacing!r}")
        if math.prod(dims) > self.max_cells:
            raise ConfigError(f"grid has {math.prod(dims)} nodes, cap is {self.max_cells}")
        origin = tuple(float(c) for c in self.origin)
        if len(origin) != 3 or not all(math.isfinite(c) for c in origin):
            raise ConfigError(f"grid origin must be a finite 3-vector, got {self.origin!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", origin)

    @classmethod
    def centered(cls, n, spacing, **kwargs):
        """Cubic grid of ``n`` nodes per axis centred on the coordinate origin."""
        dims = (n, n, n) if np.isscalar(n) else tuple(n)
        origin = tuple(-0.5 * spacing * (m - 1) for m in dims)
        return cls(dims, spacing, origin, **kwargs)

    @property
    def shape(self):
        return self.dims

    @property
    def size(self):
        return math.prod(self.dims)

    @property
    def cell_volume(self):
        return self.spacing**3

    @property
    def center(self):
        return np.array(self.origin) + 0.5 * self.spacing * (np.array(self.dims) - 1)

    def axes(self):
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.dims)]

    def coords(self):
        """Node coordinates as three arrays of shape ``dims`` (``ij`` indexing)."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def interior_mask(self, margin=1):
        """Boolean mask of nodes at least ``margin`` cells from every face."""
        mask = np.zeros(self.dims, dtype=bool)
        sl = tuple(slice(margin, n - margin) for n in self.dims)
        mask[sl] = True
        return mask

    def boundary_mask(self, width=2):
        return ~self.interior_mask(width)

    def to_dict(self):
        return {"dims": list(self.dims), "spacing": self.spacing, "origin": list(self.origin)}


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NumericalError("field contains non-finite values")


class _Field:
    ncomp = 1

    def __init__(self, grid, values, check=True):
        values = np.asarray(values, dtype=float)
        if values.shape != self._expected_shape(grid):
            raise ValueError(f"expected values of shape {self._expected_shape(grid)}, got {values.shape}")
        if check:
            _check_finite(values)
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(cls._expected_shape(grid)), check=False)

    def _coerce(self, other):
        if isinstance(other, _Field):
            if type(other) is not type(self):
                raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return type(self)(self.grid, self.values + self._coerce(other), check=False)

    __radd__ = __add__

    def __sub__(self, other):
        return type(self)(self.grid, self.values - self._coerce(other), check=False)

    def __rsub__(self, other):
        return type(self)(self.grid, self._coerce(other) - self.values, check=False)

    def __neg__(self):
        return type(self)(self.grid, -self.values, check=False)

    def __truediv__(self, c):
        return type(self)(self.grid, self.values / c, check=False)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def copy(self):
        return type(self)(self.grid, self.values.copy(), check=False)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.grid.dims}, max_abs={self.max_abs():.3e})"


class ScalarField(_Field):
    """One real value per grid node; ``values`` has shape ``grid.dims``."""

    @staticmethod
    def _expected_shape(grid):
        return tuple(grid.dims)

    def __mul__(self, other):
        if isinstance(other, VectorField3):
            return mul(self, other)
        return ScalarField(self.grid, self.values * self._coerce(other), check=False)

    __rmul__ = __mul__


class VectorField3(_Field):
    """A real 3-vector per grid node; ``values`` has shape ``(3, nx, ny, nz)``."""

    ncomp = 3

    @staticmethod
    def _expected_shape(grid):
        return (3,) + tuple(grid.dims)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return mul(other, self)
        return VectorField3(self.grid, self.values * other, check=False)

    __rmul__ = __mul__

    def magnitude(self):
        return ScalarField(self.grid, np.sqrt(np.sum(self.values**2, axis=0)), check=False)

    def component(self, i):
        return ScalarField(self.grid, self.values[i], check=False)

    @classmethod
    def from_components(cls, fx, fy, fz):
        return cls(fx.grid, np.stack([fx.values, fy.values, fz.values]))


Field = Union[ScalarField, VectorField3]


# -- differential operators ---------------------------------------------------

def _d(arr, axis, h):
    return np.gradient(arr, h, axis=axis, edge_order=2)


def gradient(f: ScalarField) -> VectorField3:
    h = f.grid.spacing
    return VectorField3(f.grid, np.stack([_d(f.values, a, h) for a in range(3)]), check=False)


def divergence(v: VectorField3) -> ScalarField:
    h = v.grid.spacing
    out = _d(v.values[0], 0, h) + _d(v.values[1], 1, h) + _d(v.values[2], 2, h)
    return ScalarField(v.grid, out, check=False)


def curl(v: VectorField3) -> VectorField3:
    h = v.grid.spacing
    vx, vy, vz = v.values
    out = np.stack([
        _d(vz, 1, h) - _d(vy, 2, h),
        _d(vx, 2, h) - _d(vz, 0, h),
        _d(vy, 0, h) - _d(vx, 1, h),
    ])
    return VectorField3(v.grid, out, check=False)


def laplacian(f: ScalarField) -> ScalarField:
    """``divergence(gradient(f))``: the wide (spacing 2h) discrete Laplacian."""
    return divergence(gradient(f))


def jacobian(v: Field) -> np.ndarray:
    """Array ``J[i, c] = d_i v_c`` of shape ``(3, ncomp, nx, ny, nz)``."""
    h = v.grid.spacing
    comps = v.values[None] if isinstance(v, ScalarField) else v.values
    return np.stack([np.stack([_d(c, a, h) for c in comps]) for a in range(3)])


# -- pointwise algebra ----------------------------------------------------------

def add(u: Field, v: Field) -> Field:
    return u + v


def scale(c: float, v: Field) -> Field:
    return v * c


def dot(u: VectorField3, v: VectorField3) -> ScalarField:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return ScalarField(u.grid, np.einsum("i...,i...->...", u.values, v.values), check=False)


def mul(f: ScalarField, v: VectorField3) -> VectorField3:
    if f.grid != v.grid:
        raise ValueError("fields live on different grids")
    return VectorField3(v.grid, f.values[None] * v.values, check=False)


# -- norm proxy ---------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    """Grid stand-in for the C^{1,alpha} norm: sup|v| + sup|Dv| + [Dv]_alpha.

    This is a sampled proxy and under-estimates the continuum norm.
    """

    sup_value: float
    sup_gradient: float
    holder_seminorm: float
    alpha: float

    @property
    def total(self):
        return self.sup_value + self.sup_gradient + self.holder_seminorm

    def to_dict(self):
        return {
            "sup_value": self.sup_value,
            "sup_gradient": self.sup_gradient,
            "holder_seminorm": self.holder_seminorm,
            "alpha": self.alpha,
            "total": self.total,
            "kind": "grid_proxy",
        }


def proxy_norm(v: Field, alpha: float = DEFAULT_ALPHA) -> NormEstimate:
    """Proxy norm of a scalar or vector field.

    ``sup_gradient`` is the largest entry of the discrete Jacobian in absolute
    value; the Hoelder part compares Jacobians at node pairs separated by
    h, 2h, 4h, ... along each axis.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    _check_finite(v.values)
    comps = v.values[None] if isinstance(v, ScalarField) else v.values
    sup_value = float(np.sqrt(np.max(np.sum(comps**2, axis=0))))
    jac = jacobian(v)
    sup_gradient = float(np.max(np.abs(jac)))
    h = v.grid.spacing
    holder = 0.0
    for axis, n in enumerate(v.grid.dims):
        d = 1
        while d < n:
            lo = [slice(None)] * jac.ndim
            hi = [slice(None)] * jac.ndim
            lo[2 + axis] = slice(0, n - d)
            hi[2 + axis] = slice(d, n)
            diff = np.max(np.abs(jac[tuple(hi)] - jac[tuple(lo)]))
            holder = max(holder, float(diff) / (d * h) ** alpha)
            d *= 2
    return NormEstimate(sup_value, sup_gradient, holder, alpha)


def interior_max(f: Field, margin=2) -> float:
    """Max absolute value over nodes at least ``margin`` cells from the boundary."""
    mask = f.grid.interior_mask(margin)
    vals = np.abs(f.values)
    if isinstance(f, VectorField3):
        vals = vals.max(axis=0)
    return float(vals[mask].max()) if mask.any() else 0.0
