"""Shared orchestration between the CLI and the HTTP service.

Each run_* function takes a validated RunConfig, does the assemble /
solve / measure cycle, and returns plain dicts and lists ready for JSON
or CSV serialization (complex numbers always split into re/im).  Nothing
here touches argv, files, or sockets; the CLI and service are thin skins
over these calls.
"""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Optional

import numpy as np

from . import basiscmp, diagnostics, solver
from .config import FORMAT_VERSION, FieldSliceSpec, RunConfig
from .geometry import place_sources
from .onebody import OneBodyParams, solve_onebody
from .periodizer import rb_modes


class WoodCriticalError(RuntimeError):
    """Raised when the configuration sits on a Wood anomaly and the caller
    did not opt in to solving anyway."""

    def __init__(self, report):
        super().__init__(
            f"Wood-critical diffraction orders {report.orders}: "
            f"min |kappa_z|/k = {report.min_rel_kz:.3e}. The scheme loses "
            "accuracy here; pass allow_wood to proceed regardless.")
        self.report = report


def set_threads(n: Optional[int]) -> None:
    """Best-effort thread-count control for the numba kernels.

    BLAS pools honor their environment variables only at process start,
    so this cannot shrink them retroactively; the compiled summation
    kernels are the dominant cost and do respect this setting.
    """
    if n is None:
        return
    try:
        import numba
        numba.set_num_threads(max(1, int(n)))
    except (ImportError, ValueError):
        pass


def _build(cfg: RunConfig):
    curve = cfg.shape.build()
    wave = cfg.incident.build()
    lattice = cfg.lattice.build()
    params = cfg.numerics.build()
    return curve, wave, lattice, params


def _wood_gate(cfg: RunConfig, allow_wood: bool):
    report = diagnostics.wood_check(cfg.incident.build(),
                                    cfg.lattice.build())
    if report.critical and not allow_wood:
        raise WoodCriticalError(report)
    return report


def _resolved(problem) -> dict:
    """The automatic choices actually used, for reproducibility."""
    return {
        "M": problem.M,
        "q_self": problem.q_self,
        "q_dist": problem.q_dist,
        "m1": problem.cell.m1,
        "z0": problem.cell.z0,
        "p": problem.params.p,
        "n0": problem.params.n0,
        "aux_count": problem.basis.count,
        "rb_count": problem.rb.count,
        "rb_propagating": int(problem.rb.n_propagating),
        "storage": "memmap" if problem.memmap_path is not None else "dense",
    }


def _order_table(result) -> list:
    rb = result.problem.rb
    rows = []
    for i in range(rb.count):
        rows.append({
            "m": int(rb.ms[i]),
            "n": int(rb.ns[i]),
            "kappa_x": float(rb.kappa_x[i]),
            "kappa_y": float(rb.kappa_y[i]),
            "kappa_z_re": float(rb.kappa_z[i].real),
            "kappa_z_im": float(rb.kappa_z[i].imag),
            "propagating": bool(rb.propagating[i]),
            "wood": bool(rb.wood[i]),
            "a_re": float(result.a[i].real),
            "a_im": float(result.a[i].imag),
            "b_re": float(result.b[i].real),
            "b_im": float(result.b[i].imag),
        })
    return rows


def _report_dict(report) -> dict:
    return {
        "eps_bc": report.eps_bc,
        "eps_per": report.eps_per,
        "eps_flux": report.eps_flux,
        "flux_applicable": report.flux_applicable,
        "wall_norm": report.wall_norm,
        "per_wall": dict(report.per_wall),
        "wood": {
            "critical": report.wood.critical,
            "orders": [list(o) for o in report.wood.orders],
            "min_rel_kz": report.wood.min_rel_kz,
            "digits_lost": report.wood.digits_lost,
        },
    }


def run_solve(cfg: RunConfig, allow_wood: bool = False, grid: int = 96,
              deterministic: bool = False) -> dict:
    """Full periodic solve; returns the result.json payload.

    deterministic=True writes null timings so repeated runs of the same
    config produce byte-identical output.
    """
    _wood_gate(cfg, allow_wood)
    curve, wave, lattice, params = _build(cfg)
    with solver.assemble_periodic(curve, wave, lattice, params,
                                  kind=cfg.bc) as problem:
        result = solver.solve_periodic(problem)
        report = diagnostics.error_report(result, grid=grid)
        payload = {
            "format_version": FORMAT_VERSION,
            "command": "solve",
            "kind": cfg.bc,
            "config": cfg.model_dump(exclude_none=True),
            "resolved": _resolved(problem),
            "orders": _order_table(result),
            "iterations": result.iterations,
            "residual": result.residual,
            "errors": _report_dict(report),
            "timings": None if deterministic else
                       {k: result.timings.get(k) for k in
                        ("fill", "factor", "solve")},
            "warnings": list(result.warnings),
        }
    return payload


def run_field(cfg: RunConfig, spec: FieldSliceSpec, total_too: bool = True,
              allow_wood: bool = False):
    """Solve and sample a planar slice; returns (fieldnames, rows)."""
    _wood_gate(cfg, allow_wood)
    curve, wave, lattice, params = _build(cfg)
    with solver.assemble_periodic(curve, wave, lattice, params,
                                  kind=cfg.bc) as problem:
        result = solver.solve_periodic(problem)
        pts = spec.points()
        vals, inside = solver.eval_field_periodic(result, pts,
                                                  neighbor="flag")
        ui = wave.field(pts)
        tot = vals.copy()
        ok = ~inside
        tot[ok] += ui[ok]
        # neighbor-copy interiors come back NaN-flagged; report them as
        # inside with zero field so the CSV/JSON stay finite
        bad = ~np.isfinite(vals)
        vals[bad] = 0.0
        tot[bad] = 0.0
    names = ["x", "y", "z", "re_u", "im_u", "re_ut", "im_ut", "inside"]
    rows = []
    for i in range(pts.shape[0]):
        rows.append({
            "x": pts[i, 0], "y": pts[i, 1], "z": pts[i, 2],
            "re_u": vals[i].real, "im_u": vals[i].imag,
            "re_ut": tot[i].real, "im_ut": tot[i].imag,
            "inside": int(inside[i]),
        })
    return names, rows


_REBUILD_PARAMS = ("p", "n0", "m1")
_ASSEMBLE_PARAMS = ("N", "P", "M", "q", "tau", "z0", "svd_tol")

SCAN_FIELDS = ["param", "value", "eps_bc", "eps_per", "eps_flux", "iters",
               "seconds"]


def run_scan(cfg: RunConfig, param: str, values, grid: int = 64,
             allow_wood: bool = False) -> list:
    """Re-solve with one numeric parameter varied; rows match SCAN_FIELDS.

    Wall-side parameters (p, n0, m1) reuse the assembled obstacle blocks
    across the sweep; the others re-assemble per value.  seconds covers
    assembly (or wall rebuild) plus the solve, not the error measures.
    """
    if param not in _REBUILD_PARAMS + _ASSEMBLE_PARAMS:
        raise ValueError(f"cannot scan over {param!r}; supported: "
                         f"{', '.join(_REBUILD_PARAMS + _ASSEMBLE_PARAMS)}")
    _wood_gate(cfg, allow_wood)
    rows = []
    if param in _REBUILD_PARAMS:
        curve, wave, lattice, params = _build(cfg)
        with solver.assemble_periodic(curve, wave, lattice, params,
                                      kind=cfg.bc) as problem:
            mid = diagnostics.midpoint_operator(problem)
            for v in values:
                t0 = time.perf_counter()
                pr = solver.rebuild_walls(problem, **{param: int(v)})
                result = solver.solve_periodic(pr)
                seconds = time.perf_counter() - t0
                # m1 changes the wall grid, so the cached midpoint operator
                # only applies while the cell is unchanged
                use_mid = mid if pr.cell is problem.cell else None
                report = diagnostics.error_report(result, grid=grid,
                                                  mid=use_mid)
                rows.append(_scan_row(param, v, report, result, seconds))
    else:
        base = cfg.model_dump(exclude_none=True)
        for v in values:
            tree = {**base, "numerics": dict(base["numerics"])}
            tree["numerics"][param] = v
            sub = RunConfig.model_validate(tree)
            curve, wave, lattice, params = _build(sub)
            t0 = time.perf_counter()
            with solver.assemble_periodic(curve, wave, lattice, params,
                                          kind=sub.bc) as problem:
                result = solver.solve_periodic(problem)
                seconds = time.perf_counter() - t0
                report = diagnostics.error_report(result, grid=grid)
                rows.append(_scan_row(param, v, report, result, seconds))
    return rows


def _scan_row(param, value, report, result, seconds) -> dict:
    return {
        "param": param,
        "value": value,
        "eps_bc": report.eps_bc,
        "eps_per": report.eps_per,
        "eps_flux": report.eps_flux,
        "iters": result.iterations,
        "seconds": seconds,
    }


def run_onebody(cfg: RunConfig, refine: float = 1.25,
                far_point=(10.0, 10.0, 10.0)) -> dict:
    """Isolated-obstacle solve with a finer self-reference for eps2."""
    curve = cfg.shape.build()
    wave = cfg.incident.build()
    num = cfg.numerics
    transmission = cfg.bc == "transmission"
    if not transmission and wave.k_minus is not None:
        wave = replace(wave, k_minus=None)

    def sources_for(n):
        inner = place_sources(curve, n, num.tau, scheme=num.scheme,
                              side="interior")
        if not transmission:
            return inner
        return inner, place_sources(curve, n, num.tau, scheme=num.scheme,
                                    side="exterior")

    ref = None
    if refine and refine > 1.0:
        n_ref = int(np.ceil(refine * num.N))
        p_ref = int(np.ceil(refine * num.P / 2) * 2)
        ref = solve_onebody(curve, sources_for(n_ref), wave,
                            OneBodyParams(P=p_ref, svd_tol=num.svd_tol,
                                          far_point=far_point))
    t0 = time.perf_counter()
    base = solve_onebody(
        curve, sources_for(num.N), wave,
        OneBodyParams(P=num.P, M=num.M, q=num.q, svd_tol=num.svd_tol,
                      far_point=far_point,
                      reference_far_value=None if ref is None
                      else ref.far_value))
    seconds = time.perf_counter() - t0
    payload = {
        "format_version": FORMAT_VERSION,
        "command": "onebody",
        "kind": cfg.bc,
        "config": cfg.model_dump(exclude_none=True),
        "N": base.N, "P": base.P, "q": base.q,
        "eps1": base.eps1,
        "eps2": base.eps2,
        "far_point": list(far_point),
        "far_re": base.far_value.real,
        "far_im": base.far_value.imag,
        "coef_norm": base.coef_norm,
        "seconds": seconds,
        "reference": None if ref is None else {
            "N": ref.N, "P": ref.P, "q": ref.q,
            "far_re": ref.far_value.real, "far_im": ref.far_value.imag,
        },
    }
    return payload


COMPARE_FIELDS = ["basis", "size", "unknowns", "eps_per", "eps_flux",
                  "q_factor_seconds", "probe_re", "probe_im"]


def run_compare(cfg: RunConfig, p_values, n2_values,
                radius: float = basiscmp.DEFAULT_PROXY_RADIUS,
                probe=(0.9, 0.9, 0.9), allow_wood: bool = False):
    """Auxiliary-basis comparison harness; returns (rows, notes)."""
    _wood_gate(cfg, allow_wood)
    curve, wave, lattice, params = _build(cfg)
    with solver.assemble_periodic(curve, wave, lattice, params,
                                  kind=cfg.bc) as problem:
        rows, notes = basiscmp.compare_bases(problem, p_values, n2_values,
                                             radius=radius, probe=probe)
    return rows, notes


def run_wood(cfg: RunConfig, margin: float = 1e-3) -> dict:
    """Wood-anomaly margins for the configuration, no solve involved."""
    wave = cfg.incident.build()
    lattice = cfg.lattice.build()
    report = diagnostics.wood_check(wave, lattice, margin)
    k = wave.k
    n0 = int(np.ceil(k * max(lattice.e_x, lattice.e_y) / np.pi)) + 1
    rb = rb_modes(wave, lattice, n0, wood_margin=margin)
    near = np.argsort(np.abs(rb.kappa_z))[:8]
    return {
        "format_version": FORMAT_VERSION,
        "command": "wood",
        "config": cfg.model_dump(exclude_none=True),
        "critical": report.critical,
        "critical_orders": [list(o) for o in report.orders],
        "min_rel_kz": report.min_rel_kz,
        "digits_lost": report.digits_lost,
        "closest_orders": [{
            "m": int(rb.ms[i]), "n": int(rb.ns[i]),
            "rel_kz": float(np.abs(rb.kappa_z[i]) / k),
            "propagating": bool(rb.propagating[i]),
        } for i in near],
    }
