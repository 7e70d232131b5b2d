"""Command-line front end.

Each subcommand builds a typed request, obtains a typed response — from the
in-process handlers by default, or from a running service via ``--server``
— and writes deterministic artifacts: CSV (RFC 4180, floats at 17
significant digits), JSON (UTF-8), and optionally SVG 1.1 polyline plots.

Exit codes: 0 success; 2 when the result is a mixed classification or a
characteristic (Schwarzschild-type) boundary where the requested pipeline
does not apply; 1 for usage, configuration, and numerical errors.

The environment variable HORIZON_LAB_THREADS caps worker threads used by
grid scans.
"""

import pathlib
import sys

import click
import numpy as np

from . import __version__, service
from .artifacts import write_csv, write_json, write_svg
from .errors import HorizonLabError

BUILTINS = ("acoustic", "gordon", "schwarzschild", "kerr")


def _parse_pair(text, flag, sep, what):
    parts = text.split(sep)
    if len(parts) != 2:
        raise click.ClickException(f"{flag} expects {what} (got {text!r})")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise click.ClickException(f"{flag} expects numeric {what} (got {text!r})")


def _metric_spec(builtin, config_path, named, extra):
    if (builtin is None) == (config_path is None):
        raise click.ClickException("provide exactly one of --builtin or --config")
    given = {k: v for k, v in named.items() if v is not None}
    if config_path is not None:
        if given or extra:
            raise click.ClickException(
                "metric parameters belong inside the config file"
            )
        text = pathlib.Path(config_path).read_text(encoding="utf-8")
        return service.MetricSpec(config_text=text)
    params = given
    for item in extra:
        if "=" not in item:
            raise click.ClickException(f"--param expects KEY=VALUE (got {item!r})")
        key, _, val = item.partition("=")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise click.ClickException(f"--param {key}: {val!r} is not a number")
    return service.MetricSpec(builtin=builtin, params=params)


def metric_options(fn):
    opts = [
        click.option("--builtin", type=click.Choice(BUILTINS), default=None,
                     help="Named metric family."),
        click.option("--config", "config_path",
                     type=click.Path(exists=True, dir_okay=False), default=None,
                     help="TOML metric configuration file."),
        click.option("--A", "param_A", type=float, default=None,
                     help="acoustic: radial flow strength (negative = inflow)."),
        click.option("--B", "param_B", type=float, default=None,
                     help="acoustic: circulation strength."),
        click.option("--m", "param_m", type=float, default=None,
                     help="schwarzschild/kerr: mass."),
        click.option("--a", "param_a", type=float, default=None,
                     help="kerr: spin."),
        click.option("--alpha", "param_alpha", type=float, default=None,
                     help="gordon: drain strength."),
        click.option("--n-index", "param_n_index", type=float, default=None,
                     help="gordon: refractive index."),
        click.option("--c", "param_c", type=float, default=None,
                     help="gordon: vacuum light speed."),
        click.option("--param", "-p", "extra_params", multiple=True,
                     metavar="KEY=VALUE", help="Additional metric parameter."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _named_params(kw):
    return {
        "A": kw.pop("param_A", None),
        "B": kw.pop("param_B", None),
        "m": kw.pop("param_m", None),
        "a": kw.pop("param_a", None),
        "alpha": kw.pop("param_alpha", None),
        "n_index": kw.pop("param_n_index", None),
        "c": kw.pop("param_c", None),
    }


def run_options(fn):
    opts = [
        click.option("--out", "out_dir", type=click.Path(file_okay=False),
                     default=".", show_default=True, help="Output directory."),
        click.option("--svg", "emit_svg", is_flag=True,
                     help="Also write an SVG plot of the traced curves."),
        click.option("--server", default=None, metavar="URL",
                     help="POST to a running service instead of computing "
                     "in-process."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _dispatch(server, path, req, resp_model, runner):
    if server is None:
        return runner(req)
    import httpx

    url = server.rstrip("/") + path
    r = httpx.post(url, json=req.model_dump(mode="json"), timeout=600.0)
    if r.status_code != 200:
        try:
            body = r.json()
        except ValueError:
            body = {}
        msg = body.get("message") or body.get("detail") or r.text
        raise click.ClickException(f"server error ({r.status_code}): {msg}")
    return resp_model.model_validate(r.json())


def _outdir(out_dir):
    p = pathlib.Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


@click.group(name="horizon-lab")
@click.version_option(version=__version__, prog_name="horizon-lab")
def cli():
    """Ergospheres, event horizons, and characteristic coordinates for
    stationary metrics."""


# ---------------------------------------------------------------- ergosphere


def _ergosphere_request(kw, seed, rays, tol, char_tol):
    named = _named_params(kw)
    spec = _metric_spec(kw.pop("builtin"), kw.pop("config_path"), named,
                        kw.pop("extra_params"))
    return service.ErgosphereRequest(
        metric=spec,
        seed=None if seed is None else _parse_pair(seed, "--seed", ",", "X,Y"),
        rays=rays, tol=tol, char_tol=char_tol,
    )


def _write_ergosphere_files(resp, outdir, emit_svg):
    forms = resp.normalized_forms + resp.normalized_forms[:1]
    rows = [
        (t, p[0], p[1], f)
        for t, p, f in zip(resp.curve.thetas, resp.curve.positions, forms)
    ]
    write_csv(outdir / "ergosphere.csv",
              ["theta", "x1", "x2", "normalized_char_form"], rows)
    write_json(outdir / "summary.json", {
        "metric": resp.metric_name,
        "classification": resp.classification,
        "orientation": resp.orientation,
        "mean_radius": resp.mean_radius,
        "max_normalized_form": resp.max_normalized_form,
        "n_rays": resp.n_rays,
        "char_tol": resp.char_tol,
    })
    if emit_svg:
        write_svg(outdir / "ergosphere.svg", [np.asarray(resp.curve.positions)])


@cli.command("ergosphere")
@metric_options
@run_options
@click.option("--seed", default=None, metavar="X,Y",
              help="Point inside the region (default: near the origin).")
@click.option("--rays", default=256, show_default=True, help="Ray count.")
@click.option("--tol", default=1e-10, show_default=True,
              help="Radial root tolerance.")
@click.option("--char-tol", default=1e-6, show_default=True,
              help="Relative threshold of the characteristic test.")
def cmd_ergosphere(seed, rays, tol, char_tol, out_dir, emit_svg, server, **kw):
    """Trace the ergoregion boundary and classify it."""
    req = _ergosphere_request(kw, seed, rays, tol, char_tol)
    resp = _dispatch(server, "/v1/ergosphere", req,
                     service.ErgosphereResponse, service.run_ergosphere)
    outdir = _outdir(out_dir)
    _write_ergosphere_files(resp, outdir, emit_svg)
    click.echo(f"classification: {resp.classification}  "
               f"orientation: {resp.orientation}  "
               f"mean radius: {resp.mean_radius:.9g}")
    return 2 if resp.classification == "mixed" else 0


@cli.command("classify")
@metric_options
@run_options
@click.option("--seed", default=None, metavar="X,Y")
@click.option("--rays", default=256, show_default=True)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--char-tol", default=1e-6, show_default=True)
def cmd_classify(seed, rays, tol, char_tol, out_dir, emit_svg, server, **kw):
    """Classify the ergosphere: characteristic / non-characteristic / mixed."""
    req = _ergosphere_request(kw, seed, rays, tol, char_tol)
    resp = _dispatch(server, "/v1/classify", req,
                     service.ErgosphereResponse, service.run_ergosphere)
    outdir = _outdir(out_dir)
    write_json(outdir / "classification.json", {
        "metric": resp.metric_name,
        "classification": resp.classification,
        "orientation": resp.orientation,
        "max_normalized_form": resp.max_normalized_form,
        "mean_radius": resp.mean_radius,
        "n_rays": resp.n_rays,
        "char_tol": resp.char_tol,
    })
    if emit_svg:
        write_svg(outdir / "ergosphere.svg", [np.asarray(resp.curve.positions)])
    click.echo(f"classification: {resp.classification}  "
               f"orientation: {resp.orientation}")
    return 2 if resp.classification == "mixed" else 0


# ------------------------------------------------------------------ geodesic


@cli.command("geodesic")
@metric_options
@run_options
@click.option("--x0", required=True, metavar="X1,X2[,X3]",
              help="Launch point (comma-separated).")
@click.option("--xi", required=True, metavar="K1,K2[,K3]",
              help="Spatial covector at launch (comma-separated).")
@click.option("--family", type=click.Choice(["plus", "minus"]),
              default="plus", show_default=True)
@click.option("--direction", type=click.Choice(["forward", "backward"]),
              default="forward", show_default=True)
@click.option("--t-max", default=10.0, show_default=True)
@click.option("--rtol", default=1e-9, show_default=True)
@click.option("--atol", default=1e-12, show_default=True)
def cmd_geodesic(x0, xi, family, direction, t_max, rtol, atol,
                 out_dir, emit_svg, server, **kw):
    """Integrate one null geodesic, time-parameterized."""
    named = _named_params(kw)
    spec = _metric_spec(kw.pop("builtin"), kw.pop("config_path"), named,
                        kw.pop("extra_params"))

    def vector(text, flag):
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            raise click.ClickException(f"{flag} expects comma-separated numbers")

    req = service.GeodesicRequest(
        metric=spec, x0=vector(x0, "--x0"), xi=vector(xi, "--xi"),
        family=family, direction=direction, t_max=t_max, rtol=rtol, atol=atol,
    )
    resp = _dispatch(server, "/v1/geodesic", req,
                     service.GeodesicResponse, service.run_geodesic)
    outdir = _outdir(out_dir)
    n = len(resp.x[0])
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"xi{i + 1}" for i in range(n)] + ["xi0"])
    rows = [
        tuple([t] + list(xr) + list(qr) + [q0])
        for t, xr, qr, q0 in zip(resp.t, resp.x, resp.xi, resp.xi0)
    ]
    write_csv(outdir / "geodesic.csv", header, rows)
    write_json(outdir / "report.json", {
        "metric": resp.metric_name,
        "termination": resp.termination,
        "n_samples": resp.n_samples,
        "max_H_drift": resp.max_H_drift,
        "family": family,
        "direction": direction,
    })
    if emit_svg:
        write_svg(outdir / "geodesic.svg",
                  [np.asarray(resp.x)[:, :2]])
    click.echo(f"termination: {resp.termination}  samples: {resp.n_samples}  "
               f"max |H| drift: {resp.max_H_drift:.3e}")
    return 0


# ------------------------------------------------------------------- horizon


@cli.command("horizon")
@metric_options
@run_options
@click.option("--seed", default=None, metavar="X,Y")
@click.option("--bracket", default=None, metavar="LO:HI",
              help="Section radii straddling the limit cycle.")
@click.option("--tol", default=1e-6, show_default=True,
              help="Fixed-point tolerance on the section.")
@click.option("--n-theta", default=256, show_default=True,
              help="Angles sampled along the traced cycle.")
@click.option("--theta-star", default=0.0, show_default=True,
              help="Section angle.")
@click.option("--rays", default=256, show_default=True)
@click.option("--char-tol", default=1e-6, show_default=True)
def cmd_horizon(seed, bracket, tol, n_theta, theta_star, rays, char_tol,
                out_dir, emit_svg, server, **kw):
    """Find the event horizon as a limit cycle of backward null geodesics."""
    named = _named_params(kw)
    spec = _metric_spec(kw.pop("builtin"), kw.pop("config_path"), named,
                        kw.pop("extra_params"))
    req = service.HorizonRequest(
        metric=spec,
        seed=None if seed is None else _parse_pair(seed, "--seed", ",", "X,Y"),
        bracket=None if bracket is None
        else _parse_pair(bracket, "--bracket", ":", "LO:HI"),
        tol=tol, n_theta=n_theta, theta_star=theta_star,
        rays=rays, char_tol=char_tol,
    )
    resp = _dispatch(server, "/v1/horizon", req,
                     service.HorizonResponse, service.run_horizon)
    outdir = _outdir(out_dir)
    report = {
        "metric": resp.metric_name,
        "status": resp.status,
        "message": resp.message,
        "classification": resp.classification,
        "orientation": resp.orientation,
        "rho_star": resp.rho_star,
        "residual": resp.residual,
        "ergosphere_mean_radius": resp.ergosphere_mean_radius,
    }
    write_json(outdir / "report.json", report)
    if resp.status != "ok":
        click.echo(resp.message)
        return 2
    rows = [
        (t, float(np.hypot(p[0], p[1])), p[0], p[1])
        for t, p in zip(resp.curve.thetas, resp.curve.positions)
    ]
    write_csv(outdir / "horizon.csv", ["theta", "rho", "x1", "x2"], rows)
    if emit_svg:
        write_svg(outdir / "horizon.svg", [np.asarray(resp.curve.positions)])
    click.echo(f"rho* = {resp.rho_star:.9g}  residual = {resp.residual:.3e}")
    return 0


# ---------------------------------------------------------------- charcoords


@cli.command("charcoords")
@metric_options
@run_options
@click.option("--seed", default=None, metavar="X,Y")
@click.option("--rays", default=256, show_default=True,
              help="Boundary trace resolution.")
@click.option("--depth", default=1.05, show_default=True,
              help="Collar depth (transversal coordinate extent).")
@click.option("--n-rho", default=64, show_default=True,
              help="Collar grid rows.")
@click.option("--n-theta", default=256, show_default=True,
              help="Collar grid columns.")
@click.option("--field-rho", default=128, show_default=True,
              help="Transported-field grid rows.")
@click.option("--field-theta", default=256, show_default=True,
              help="Transported-field grid columns.")
@click.option("--oversample", default=2, show_default=True,
              help="Launch-ray multiple for the transport resampling.")
@click.option("--bracket", default=None, metavar="LO:HI",
              help="Horizon bracket; caps the strip short of the horizon.")
@click.option("--tol", default=1e-8, show_default=True,
              help="Horizon fixed-point tolerance.")
@click.option("--char-tol", default=1e-6, show_default=True)
def cmd_charcoords(seed, rays, depth, n_rho, n_theta, field_rho, field_theta,
                   oversample, bracket, tol, char_tol, out_dir, emit_svg,
                   server, **kw):
    """Transport characteristic coordinates across the ergoregion strip and
    map it onto a half-plane."""
    named = _named_params(kw)
    spec = _metric_spec(kw.pop("builtin"), kw.pop("config_path"), named,
                        kw.pop("extra_params"))
    req = service.CharcoordsRequest(
        metric=spec,
        seed=None if seed is None else _parse_pair(seed, "--seed", ",", "X,Y"),
        rays=rays, depth=depth, n_rho=n_rho, n_theta=n_theta,
        field_rho=field_rho, field_theta=field_theta, oversample=oversample,
        bracket=None if bracket is None
        else _parse_pair(bracket, "--bracket", ":", "LO:HI"),
        tol=tol, char_tol=char_tol,
    )
    resp = _dispatch(server, "/v1/charcoords", req,
                     service.CharcoordsResponse, service.run_charcoords)
    outdir = _outdir(out_dir)
    report = {
        "metric": resp.metric_name,
        "status": resp.status,
        "message": resp.message,
        "classification": resp.classification,
    }
    if resp.status == "ok":
        report.update({
            "c1": resp.c1,
            "c1_r_squared": resp.c1_r_squared,
            "c1_window": list(resp.c1_window),
            "cap": resp.cap,
            "depth_sign": resp.depth_sign,
            "fold_check": "pass" if resp.fold.fold_free else "fail",
            "fold": resp.fold.model_dump(),
            "horizon_rho_star": resp.horizon_rho_star,
        })
    write_json(outdir / "report.json", report)
    if resp.status != "ok":
        click.echo(resp.message)
        return 2
    rows = []
    for i, r in enumerate(resp.rho_grid):
        for j, t in enumerate(resp.theta_grid):
            rows.append((r, t, resp.S_plus[i][j], resp.S_minus[i][j],
                         resp.delta_tilde[i][j]))
    write_csv(outdir / "charfield.csv",
              ["rho", "theta", "S_plus", "S_minus", "delta_tilde"], rows)
    hrows = []
    for i, r in enumerate(resp.rho_grid):
        for j, t in enumerate(resp.theta_grid):
            hrows.append((r, t, resp.y1[i][j], resp.y2[i][j]))
    write_csv(outdir / "halfplane.csv", ["rho", "theta", "y1", "y2"], hrows)
    if emit_svg:
        y1 = np.asarray(resp.y1)
        y2 = np.asarray(resp.y2)
        stride = max(1, len(resp.rho_grid) // 16)
        curves = [np.column_stack([y1[i], y2[i]])
                  for i in range(0, len(resp.rho_grid), stride)]
        write_svg(outdir / "halfplane.svg", curves)
    click.echo(f"C1 = {resp.c1:.6g} (R^2 = {resp.c1_r_squared:.6g})  "
               f"fold check: {'pass' if resp.fold.fold_free else 'fail'}")
    return 0


# ---------------------------------------------------------------------- kerr


@cli.command("kerr")
@run_options
@click.option("--m", "mass", default=1.0, show_default=True, help="Mass.")
@click.option("--a", "spin", default=0.5, show_default=True, help="Spin.")
@click.option("--samples", default=256, show_default=True,
              help="Rays per surface.")
@click.option("--char-tol", default=1e-6, show_default=True)
def cmd_kerr(mass, spin, samples, char_tol, out_dir, emit_svg, server):
    """Trace both ergo-surfaces of the reduced rotating source and verify
    they are characteristic."""
    req = service.KerrRequest(m=mass, a=spin, n_samples=samples,
                              char_tol=char_tol)
    resp = _dispatch(server, "/v1/kerr", req,
                     service.KerrResponse, service.run_kerr)
    outdir = _outdir(out_dir)
    rows = []
    for label, surf in (("outer", resp.outer), ("inner", resp.inner)):
        for t, p in zip(surf.angles, surf.positions):
            rows.append((label, t, p[0], p[1]))
    write_csv(outdir / "kerr.csv", ["surface", "angle", "rho", "z"], rows)

    def surf_report(surf):
        return {
            "r_level": surf.r_level,
            "ellipse_deviation": surf.ellipse_deviation,
            "classification": surf.classification,
            "orientation": surf.orientation,
            "max_normalized_form": surf.max_normalized_form,
        }

    write_json(outdir / "report.json", {
        "m": resp.m,
        "a": resp.a,
        "r_plus": resp.r_plus,
        "r_minus": resp.r_minus,
        "outer": surf_report(resp.outer),
        "inner": surf_report(resp.inner),
    })
    if emit_svg:
        write_svg(outdir / "kerr.svg",
                  [np.asarray(resp.outer.positions),
                   np.asarray(resp.inner.positions)])
    click.echo(f"r+ = {resp.r_plus:.9g}  r- = {resp.r_minus:.9g}  "
               f"max ellipse deviation = "
               f"{max(resp.outer.ellipse_deviation, resp.inner.ellipse_deviation):.3e}")
    return 0


# --------------------------------------------------------------------- serve


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(service.app, host=host, port=port)
    return 0


def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except HorizonLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ValueError as exc:
        # pydantic validation failures surface here in-process
        click.echo(f"error: {exc}", err=True)
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
