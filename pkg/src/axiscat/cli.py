"""Command-line front end.

Reads one JSON config tree (see config.RunConfig), applies --set
overrides, and either runs in-process or forwards the request to a
running service instance via --server.  All angles are radians.

Exit codes: 0 success, 2 config error, 3 solver did not converge,
4 Wood-critical configuration (override with --allow-wood).

Output conventions: JSON results carry explicit re/im float pairs and
embed the resolved config plus a format version; CSV files start with
two '#'-prefixed metadata lines (format version, resolved config as
JSON) followed by an RFC-4180 table, so spreadsheet tools should be
pointed past the comment lines.
"""

from __future__ import annotations

import csv
import io
import json
import sys

import click
from pydantic import ValidationError

from . import runner
from .basiscmp import DEFAULT_PROXY_RADIUS
from .config import (FORMAT_VERSION, FieldSliceSpec, RunConfig,
                     apply_overrides, load_config)
from .runner import WoodCriticalError
from .solver import GmresNotConverged

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_WOOD = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(config_path, overrides) -> RunConfig:
    try:
        cfg = load_config(config_path)
        if overrides:
            kv = {}
            for item in overrides:
                if "=" not in item:
                    raise ValueError(
                        f"--set expects KEY=VALUE, got {item!r}")
                key, _, value = item.partition("=")
                kv[key.strip()] = value
            cfg = apply_overrides(cfg, kv)
        return cfg
    except FileNotFoundError:
        _fail(EXIT_CONFIG, f"config file not found: {config_path}")
    except json.JSONDecodeError as e:
        _fail(EXIT_CONFIG, f"config is not valid JSON: {e}")
    except (ValidationError, ValueError) as e:
        _fail(EXIT_CONFIG, str(e))


def common_options(f):
    f = click.option("-c", "--config", "config_path", required=True,
                     type=click.Path(), help="JSON run configuration.")(f)
    f = click.option("--set", "overrides", multiple=True,
                     metavar="KEY=VALUE",
                     help="Override a config entry by dotted path, e.g. "
                          "--set numerics.P=60 (repeatable).")(f)
    f = click.option("--threads", type=int, default=None,
                     help="Worker threads for the summation kernels "
                          "(default: all cores).")(f)
    f = click.option("--server", "server_url", default=None, metavar="URL",
                     help="Send the request to a running service instead "
                          "of solving in-process.")(f)
    f = click.option("-o", "--output", "output_path", default=None,
                     type=click.Path(),
                     help="Output file (default: config outputs section, "
                          "else stdout).")(f)
    return f


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit_json(payload, path):
    text = _dump_json(payload)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        click.echo(f"wrote {path}", err=True)
    else:
        click.echo(text, nl=False)


def _emit_csv(fieldnames, rows, path, meta):
    buf = io.StringIO()
    buf.write(f"# format: {FORMAT_VERSION}\r\n")
    buf.write("# config: " + json.dumps(meta, sort_keys=True) + "\r\n")
    w = csv.DictWriter(buf, fieldnames=fieldnames, extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        click.echo(f"wrote {path}", err=True)
    else:
        click.echo(buf.getvalue(), nl=False)


def _post(server_url, endpoint, body) -> dict:
    import httpx
    url = server_url.rstrip("/") + "/v1/" + endpoint
    try:
        resp = httpx.post(url, json=body, timeout=None)
    except httpx.HTTPError as e:
        _fail(1, f"request to {url} failed: {e}")
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    message = detail.get("message", str(detail)) \
        if isinstance(detail, dict) else str(detail)
    code = detail.get("code", "") if isinstance(detail, dict) else ""
    if resp.status_code == 409 or code == "wood_critical":
        _fail(EXIT_WOOD, message)
    if resp.status_code == 422:
        _fail(EXIT_CONFIG, message)
    if code == "solver_not_converged":
        _fail(EXIT_SOLVER, message)
    _fail(1, f"server returned {resp.status_code}: {message}")


def _run(local, server_url, endpoint, body):
    """Run locally, translating the documented failures to exit codes,
    or forward to the service which reports them as HTTP statuses."""
    if server_url:
        return _post(server_url, endpoint, body)
    try:
        return local()
    except WoodCriticalError as e:
        _fail(EXIT_WOOD, str(e))
    except GmresNotConverged as e:
        _fail(EXIT_SOLVER, str(e))
    except (ValidationError, ValueError) as e:
        _fail(EXIT_CONFIG, str(e))


@click.group()
@click.version_option(FORMAT_VERSION, prog_name="axiscat")
def main():
    """Acoustic scattering from doubly-periodic arrays of axisymmetric
    obstacles.  All angles are radians; see the config reference in the
    README for the full key tree."""


@main.command()
@common_options
@click.option("--allow-wood", is_flag=True,
              help="Solve even at a Wood-critical configuration.")
@click.option("--dry-run", is_flag=True,
              help="Validate and print the resolved config, touch nothing.")
@click.option("--deterministic", is_flag=True,
              help="Write null timings so reruns are byte-identical.")
@click.option("--grid", type=int, default=96, show_default=True,
              help="Surface grid per direction for the error report.")
def solve(config_path, overrides, threads, server_url, output_path,
          allow_wood, dry_run, deterministic, grid):
    """Solve the periodic problem and write result.json."""
    cfg = _load(config_path, overrides)
    if dry_run:
        click.echo(_dump_json({
            "format_version": FORMAT_VERSION,
            "config": cfg.model_dump(exclude_none=True),
        }), nl=False)
        return
    runner.set_threads(threads)
    payload = _run(
        lambda: runner.run_solve(cfg, allow_wood=allow_wood, grid=grid,
                                 deterministic=deterministic),
        server_url, "solve",
        {"config": cfg.model_dump(exclude_none=True),
         "allow_wood": allow_wood, "grid": grid,
         "deterministic": deterministic})
    if output_path is None and cfg.outputs and cfg.outputs.result_path:
        output_path = cfg.outputs.result_path
    _emit_json(payload, output_path)


def _slice_from_flags(cfg, plane, offset, lo1, hi1, lo2, hi2, n1, n2):
    base = cfg.outputs.field_slice if cfg.outputs and \
        cfg.outputs.field_slice else FieldSliceSpec()
    given = {k: v for k, v in [("plane", plane), ("offset", offset),
                               ("lo1", lo1), ("hi1", hi1), ("lo2", lo2),
                               ("hi2", hi2), ("n1", n1), ("n2", n2)]
             if v is not None}
    try:
        return FieldSliceSpec.model_validate({**base.model_dump(), **given})
    except ValidationError as e:
        _fail(EXIT_CONFIG, str(e))


@main.command()
@common_options
@click.option("--allow-wood", is_flag=True)
@click.option("--plane", type=click.Choice(["xy", "xz", "yz"]), default=None,
              help="Slice orientation (default from config, else xz).")
@click.option("--offset", type=float, default=None,
              help="Coordinate of the held-fixed axis.")
@click.option("--lo1", type=float, default=None)
@click.option("--hi1", type=float, default=None)
@click.option("--lo2", type=float, default=None)
@click.option("--hi2", type=float, default=None)
@click.option("--n1", type=int, default=None)
@click.option("--n2", type=int, default=None)
def field(config_path, overrides, threads, server_url, output_path,
          allow_wood, plane, offset, lo1, hi1, lo2, hi2, n1, n2):
    """Solve and sample the field on an axis-aligned plane (CSV)."""
    cfg = _load(config_path, overrides)
    spec = _slice_from_flags(cfg, plane, offset, lo1, hi1, lo2, hi2, n1, n2)
    runner.set_threads(threads)
    if server_url:
        data = _post(server_url, "field",
                     {"config": cfg.model_dump(exclude_none=True),
                      "slice": spec.model_dump(), "allow_wood": allow_wood})
        names, rows = data["fieldnames"], data["rows"]
    else:
        names, rows = _run(
            lambda: runner.run_field(cfg, spec, allow_wood=allow_wood),
            None, "", None)
    if output_path is None and cfg.outputs and cfg.outputs.field_path:
        output_path = cfg.outputs.field_path
    meta = {"command": "field", "config": cfg.model_dump(exclude_none=True),
            "slice": spec.model_dump()}
    _emit_csv(names, rows, output_path, meta)


@main.command()
@common_options
@click.option("--allow-wood", is_flag=True)
@click.option("--param", required=True,
              help="Config key to vary: one of N, P, M, q, tau, z0, "
                   "svd_tol, p, n0, m1.")
@click.option("--values", required=True,
              help="Comma-separated values, e.g. 8,12,16,20.")
@click.option("--grid", type=int, default=64, show_default=True)
def scan(config_path, overrides, threads, server_url, output_path,
         allow_wood, param, values, grid):
    """Re-solve over a parameter sweep; emit the error table (CSV)."""
    cfg = _load(config_path, overrides)
    try:
        vals = [float(s) for s in values.split(",") if s.strip()]
    except ValueError:
        _fail(EXIT_CONFIG, f"--values must be comma-separated numbers, "
                           f"got {values!r}")
    if not vals:
        _fail(EXIT_CONFIG, "--values is empty")
    runner.set_threads(threads)
    if server_url:
        data = _post(server_url, "scan",
                     {"config": cfg.model_dump(exclude_none=True),
                      "param": param, "values": vals, "grid": grid,
                      "allow_wood": allow_wood})
        rows = data["rows"]
    else:
        rows = _run(
            lambda: runner.run_scan(cfg, param, vals, grid=grid,
                                    allow_wood=allow_wood),
            None, "", None)
    meta = {"command": "scan", "param": param,
            "config": cfg.model_dump(exclude_none=True)}
    _emit_csv(runner.SCAN_FIELDS, rows, output_path, meta)


@main.command()
@common_options
@click.option("--refine", type=float, default=1.25, show_default=True,
              help="Self-reference refinement factor for eps2 "
                   "(0 disables the reference solve).")
@click.option("--far-point", default="10,10,10", show_default=True,
              help="Far probe point x,y,z for the eps2 comparison.")
def onebody(config_path, overrides, threads, server_url, output_path,
            refine, far_point):
    """Solve the isolated obstacle and report eps1/eps2 (JSON)."""
    cfg = _load(config_path, overrides)
    try:
        fp = tuple(float(s) for s in far_point.split(","))
        if len(fp) != 3:
            raise ValueError
    except ValueError:
        _fail(EXIT_CONFIG, f"--far-point must be x,y,z, got {far_point!r}")
    runner.set_threads(threads)
    payload = _run(
        lambda: runner.run_onebody(cfg, refine=refine, far_point=fp),
        server_url, "onebody",
        {"config": cfg.model_dump(exclude_none=True), "refine": refine,
         "far_point": fp})
    _emit_json(payload, output_path)


@main.command("compare-basis")
@common_options
@click.option("--allow-wood", is_flag=True)
@click.option("--p-values", required=True,
              help="Comma-separated harmonic degrees, e.g. 6,10,14.")
@click.option("--n2-values", required=True,
              help="Comma-separated proxy grid sizes, e.g. 8,12,16.")
@click.option("--radius", type=float, default=DEFAULT_PROXY_RADIUS,
              show_default=True, help="Proxy sphere radius.")
@click.option("--probe", default="0.9,0.9,0.9", show_default=True,
              help="Exterior probe point x,y,z.")
def compare_basis(config_path, overrides, threads, server_url, output_path,
                  allow_wood, p_values, n2_values, radius, probe):
    """Compare auxiliary bases at matched accuracy (CSV)."""
    cfg = _load(config_path, overrides)
    try:
        pv = [int(s) for s in p_values.split(",") if s.strip()]
        nv = [int(s) for s in n2_values.split(",") if s.strip()]
        pt = tuple(float(s) for s in probe.split(","))
        if len(pt) != 3 or not (pv or nv):
            raise ValueError
    except ValueError:
        _fail(EXIT_CONFIG, "--p-values/--n2-values must be comma-separated "
                           "integers and --probe must be x,y,z")
    runner.set_threads(threads)
    if server_url:
        data = _post(server_url, "compare-basis",
                     {"config": cfg.model_dump(exclude_none=True),
                      "p_values": pv, "n2_values": nv, "radius": radius,
                      "probe": pt, "allow_wood": allow_wood})
        rows, notes = data["rows"], data.get("notes", [])
    else:
        rows, notes = _run(
            lambda: runner.run_compare(cfg, pv, nv, radius=radius, probe=pt,
                                       allow_wood=allow_wood),
            None, "", None)
    for note in notes:
        click.echo(f"note: {note}", err=True)
    meta = {"command": "compare-basis", "radius": radius,
            "config": cfg.model_dump(exclude_none=True)}
    _emit_csv(runner.COMPARE_FIELDS, rows, output_path, meta)


@main.command()
@common_options
@click.option("--margin", type=float, default=1e-3, show_default=True,
              help="Wood-criticality threshold on |kappa_z|/k.")
def wood(config_path, overrides, threads, server_url, output_path, margin):
    """Report Wood-anomaly margins for the configuration (JSON)."""
    cfg = _load(config_path, overrides)
    payload = _run(
        lambda: runner.run_wood(cfg, margin=margin),
        server_url, "wood",
        {"config": cfg.model_dump(exclude_none=True), "margin": margin})
    _emit_json(payload, output_path)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--threads", type=int, default=None)
def serve(host, port, threads):
    """Run the HTTP service."""
    import uvicorn
    from .service import create_app
    runner.set_threads(threads)
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
