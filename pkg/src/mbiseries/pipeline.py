"""End-to-end runs: sources -> seed fields -> certificate -> series -> E, B."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import SCHEMA_VERSION, RunConfig
from .convergence import certify
from .errors import UncertifiedError
from .grid import proxy_norm
from .potential import PotentialSolver
from .series import (SeriesEngine, assemble, coefficient_norms, norm_chain, radicand,
                     reconstruct_EB, residuals)
from .sources import build_sources

log = logging.getLogger(__name__)


def make_solver(cfg: RunConfig, workers=None) -> PotentialSolver:
    """Solver that records projector boundary mass instead of raising."""
    return PotentialSolver(cfg.grid, method=cfg.method, kernel=cfg.kernel,
                           boundary_tol=None, workers=workers)


@dataclass
class Seed:
    cfg: RunConfig
    solver: PotentialSolver
    engine: SeriesEngine
    pair: object
    state: object
    norm_D: object
    norm_H: object

    def certificate(self, boundary_mass=None, beta=None, K=None, mode=None):
        return certify(self.cfg.beta if beta is None else beta,
                       self.norm_D.total, self.norm_H.total,
                       self.cfg.order if K is None else K,
                       mode or self.cfg.mode, safety=self.cfg.safety,
                       boundary_mass=boundary_mass, boundary_tol=self.cfg.boundary_tol)


def seed_run(cfg: RunConfig, workers=None) -> Seed:
    solver = make_solver(cfg, workers)
    pair = build_sources(cfg.sources, cfg.grid, solver)
    engine = SeriesEngine(cfg.grid, solver, xy_method=cfg.xy_method)
    state = engine.seed(pair.rho, pair.j, cfg.mode)
    nd = proxy_norm(state.D_coeffs[0], cfg.alpha)
    nh = proxy_norm(state.H_coeffs[0], cfg.alpha)
    return Seed(cfg, solver, engine, pair, state, nd, nh)


@dataclass
class SolveResult:
    state: object
    fields: dict
    report: dict


def solve(cfg: RunConfig, force=False, workers=None) -> SolveResult:
    """Run the series through ``cfg.order`` and reconstruct ``E`` and ``B``.

    Raises :class:`UncertifiedError` when ``cfg.beta`` is not certified
    (before the run) or when projector boundary mass exceeds the tolerance
    (after the run), unless ``force`` is set.
    """
    t_start = time.perf_counter()
    seed = seed_run(cfg, workers)
    cert0 = seed.certificate()
    if not cert0.certified and not force:
        raise UncertifiedError(
            f"beta={cfg.beta} is not certified: x={cert0.x:.6g} >= radius {cert0.radius_used:.6g}",
            cert0)
    state = seed.engine.run(seed.state, cfg.order)
    ratios = [max(d.boundary_ratio_D, d.boundary_ratio_H) for d in state.diagnostics]
    boundary_mass = max(ratios, default=0.0)
    cert = seed.certificate(boundary_mass=boundary_mass)

    D, H = assemble(state, cfg.beta)
    rad_min = float(radicand(D, H, cfg.beta).min())
    E, B = reconstruct_EB(D, H, cfg.beta)
    res = residuals(E, B, D, H, seed.pair.rho, seed.pair.j)

    norms = coefficient_norms(state, cfg.alpha)
    t = cfg.beta**4
    for row in norms:
        row["weighted"] = t ** row["k"] * row["N"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "config": cfg.to_dict(),
        "forced": bool(force),
        "certificate_before_run": cert0.to_dict(),
        "certificate": cert.to_dict(),
        "seed_norms": {"D": seed.norm_D.to_dict(), "H": seed.norm_H.to_dict()},
        "sources": seed.pair.to_dict(),
        "coefficient_norms": norms,
        "norm_chain": norm_chain(state, cfg.safety, cfg.alpha, norms),
        "steps": [d.to_dict() for d in state.diagnostics],
        "residuals": res,
        "radicand_min": rad_min,
        "seconds": time.perf_counter() - t_start,
    }
    fields = {"D": D, "H": H, "E": E, "B": B}
    if not cert.certified and not force:
        raise UncertifiedError(
            f"projector boundary mass {boundary_mass:.3e} exceeds {cfg.boundary_tol:.1e}", cert)
    return SolveResult(state, fields, report)


def json_safe(obj):
    """Replace non-finite floats and numpy scalars so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
