import math

import numpy as np
import pytest

from mbiseries.errors import ConfigError, NumericalError, SupportError
from mbiseries.grid import GridSpec, VectorField3, divergence, interior_max
from mbiseries.sources import (SourceConfig, build_charge_density, build_current_density,
                               build_sources, mollified_ball_total, pair_from_fields)

from conftest import random_compact_vector


def test_config_validation():
    with pytest.raises(ConfigError):
        SourceConfig("monopole")
    with pytest.raises(ConfigError):
        SourceConfig("mollified_ball")
    with pytest.raises(ConfigError):
        SourceConfig("ring_current", major_radius=1.0, minor_radius=2.0)
    with pytest.raises(ConfigError):
        SourceConfig("ring_current", major_radius=2.0, minor_radius=1.0, axis=(0, 0, 0))
    with pytest.raises(ConfigError):
        SourceConfig("superposition")
    with pytest.raises(ConfigError):
        SourceConfig.from_dict({"kind": "mollified_ball", "radius": 1.0, "charge": 2.0})


def test_config_round_trip():
    cfg = SourceConfig("superposition", children=[
        {"kind": "mollified_ball", "radius": 2.0, "amplitude": -1.0, "center": [1, 0, 0]},
        {"kind": "ring_current", "major_radius": 3.0, "minor_radius": 1.0, "axis": [0, 2, 0]},
    ])
    again = SourceConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.children[1].axis == (0.0, 1.0, 0.0)
    assert len(list(cfg.leaves())) == 2


def test_mollified_ball_total_charge():
    # closed form vs a fine 1D radial quadrature
    r = np.linspace(0.0, 1.5, 200001)
    f = 4 * math.pi * r**2 * (1 - (r / 1.5) ** 2) ** 2
    assert mollified_ball_total(1.5) == pytest.approx(np.trapezoid(f, r), rel=1e-9)


@pytest.mark.parametrize("kind", ["mollified_ball", "truncated_gaussian"])
def test_charge_density_normalized_and_compact(kind):
    g = GridSpec.centered(20, 0.5)
    cfg = SourceConfig(kind, center=(0.5, -0.5, 0.0), radius=2.5, amplitude=3.0)
    rho = build_charge_density(cfg, g)
    assert rho.values.sum() * g.cell_volume == pytest.approx(3.0, rel=1e-13)
    x, y, z = g.coords()
    r = np.sqrt((x - 0.5) ** 2 + (y + 0.5) ** 2 + z**2)
    assert np.all(rho.values[r >= 2.5] == 0.0)
    assert np.all(rho.values >= 0.0)


def test_spherical_symmetry_of_centered_ball():
    g = GridSpec.centered(17, 1.0)
    rho = build_charge_density(SourceConfig("mollified_ball", radius=5.0), g).values
    np.testing.assert_array_equal(rho, rho[::-1])
    np.testing.assert_array_equal(rho, rho.transpose(1, 0, 2))
    np.testing.assert_array_equal(rho, rho.transpose(2, 1, 0))


def test_source_must_fit():
    g = GridSpec.centered(16, 1.0)
    with pytest.raises(SupportError):
        build_charge_density(SourceConfig("mollified_ball", radius=6.5), g)
    with pytest.raises(SupportError):
        build_current_density(SourceConfig("ring_current", major_radius=5.0, minor_radius=1.5), g)


def test_ring_current_divergence_free_and_compact():
    g = GridSpec.centered(33, 1.0)
    cfg = SourceConfig("ring_current", center=(0.5, 0, 0), axis=(0.2, 0.1, 1.0),
                       major_radius=8.0, minor_radius=3.0, amplitude=2.0)
    j = build_current_density(cfg, g)
    assert interior_max(divergence(j), margin=2) < 1e-13 * j.max_abs()
    x, y, z = g.coords()
    d = np.stack([x - 0.5, y, z])
    n = np.asarray(cfg.axis)
    s = np.einsum("i,i...->...", n, d)
    r = np.sqrt(np.maximum((d**2).sum(0) - s**2, 0))
    tube = np.sqrt((r - 8.0) ** 2 + s**2)
    # the discrete curl smears the support by at most one cell; for a tilted
    # axis the cancellation outside the tube is exact up to round-off
    outside = np.abs(j.values).max(0)[tube > 3.0 + math.sqrt(3)]
    assert outside.max() <= 1e-13 * j.max_abs()
    # the flux through a half plane containing the axis equals the loop current
    flux_plane = (np.abs(y) < 1e-9) & (x > 0.5)
    assert abs(j.values[1][flux_plane].sum()) * g.spacing**2 == pytest.approx(2.0, rel=2e-2)


def test_axis_aligned_ring_has_no_axial_component():
    g = GridSpec.centered(24, 1.0)
    j = build_current_density(SourceConfig("ring_current", major_radius=6.0, minor_radius=2.0), g)
    assert np.all(j.values[2] == 0.0)
    x, y, z = g.coords()
    tube = np.sqrt((np.sqrt(x * x + y * y) - 6.0) ** 2 + z * z)
    assert np.all(j.values[:, tube > 2.0 + math.sqrt(3)] == 0.0)


def test_build_sources_and_projection_of_user_current(rng):
    g = GridSpec.centered(24, 1.0)
    pair = build_sources([SourceConfig("mollified_ball", radius=4.0),
                          SourceConfig("ring_current", major_radius=6.0, minor_radius=2.0)], g)
    assert pair.rho_total == pytest.approx(1.0)
    assert pair.j_div_residual < 1e-12
    raw = random_compact_vector(g, rng, radius=6.0)
    with pytest.raises(NumericalError):
        pair_from_fields(pair.rho, raw, project=False)
    fixed = pair_from_fields(pair.rho, raw, project=True)
    assert fixed.j_div_residual_before > 1e-3
    assert fixed.j_div_residual < 1e-12 * raw.max_abs()


def test_empty_source_list_gives_zero_fields():
    g = GridSpec.centered(12, 1.0)
    pair = build_sources([], g)
    assert pair.rho.max_abs() == 0.0 and pair.j.max_abs() == 0.0
    assert isinstance(pair.j, VectorField3)
