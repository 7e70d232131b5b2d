"""Service layer: pydantic request/response models, pipeline handlers, and
the FastAPI application.

The handlers are plain functions from request model to response model; the
HTTP app and the command-line client both call them, so a CLI run and a
POST to the service produce identical payloads.  Handlers raise
HorizonLabError subclasses; the app maps those to HTTP 400 with a typed
error body.
"""

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from . import __version__, axisym, charcoords, ergosphere, geodesics, horizon
from .errors import HorizonLabError, ParameterError
from .metric import build_builtin, kerr_restricted, parse_metric_config

# classification / orientation tags used in payloads (the library's labels
# are CamelCase; the wire format uses lowercase tokens)
CLASS_TAGS = {
    ergosphere.CASE_CHARACTERISTIC: "characteristic",
    ergosphere.CASE_NONCHARACTERISTIC: "non_characteristic",
    ergosphere.CASE_MIXED: "mixed",
}

SCHWARZSCHILD_TYPE_MESSAGE = "Schwarzschild-type: horizon = ergosphere"

DEFAULT_SEED = (1e-3, 0.0)  # near-origin interior point; radii measured
# from the seed inherit an O(|seed|^2 / R) bias in their mean, so keep it tiny


class MetricSpec(BaseModel):
    """Metric source: exactly one of a named builtin or TOML config text."""

    builtin: Optional[str] = None
    params: dict[str, float] = Field(default_factory=dict)
    config_text: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.config_text is None):
            raise ValueError("provide exactly one of 'builtin' or 'config_text'")
        if self.config_text is not None and self.params:
            raise ValueError("'params' belongs inside the config text")
        return self

    def build(self):
        if self.builtin is not None:
            return build_builtin(self.builtin, dict(self.params))
        return parse_metric_config(self.config_text)


def _resolve_seed(m, seed):
    if seed is not None:
        return (float(seed[0]), float(seed[1]))
    if m.name.startswith("kerr"):
        raise ParameterError(
            "the reduced rotating source bounds a shell, not a disk: pass an "
            "explicit seed inside the shell, or use the 'kerr' command"
        )
    return DEFAULT_SEED


class CurvePayload(BaseModel):
    thetas: list[float]
    positions: list[list[float]]  # closed polyline, last point repeats first


def _curve_payload(thetas, positions):
    return CurvePayload(
        thetas=[float(t) for t in thetas],
        positions=[[float(v) for v in p] for p in positions],
    )


# ---------------------------------------------------------------- ergosphere


class ErgosphereRequest(BaseModel):
    metric: MetricSpec
    seed: Optional[tuple[float, float]] = None
    rays: int = Field(256, ge=16)
    tol: float = Field(1e-10, gt=0)
    char_tol: float = Field(1e-6, gt=0)


class ErgosphereResponse(BaseModel):
    metric_name: str
    classification: Literal["characteristic", "non_characteristic", "mixed"]
    orientation: Literal["black_hole", "white_hole", "indefinite"]
    mean_radius: float
    max_normalized_form: float
    n_rays: int
    char_tol: float
    curve: CurvePayload
    normalized_forms: list[float]


def run_ergosphere(req: ErgosphereRequest) -> ErgosphereResponse:
    m = req.metric.build()
    seed = _resolve_seed(m, req.seed)
    curve = ergosphere.trace_ergosphere(
        m, seed, n_rays=req.rays, tol=req.tol, char_tol=req.char_tol
    )
    forms = [
        v.char_form / max(v.char_scale, 1e-300) for v in curve.vertices[:-1]
    ]
    return ErgosphereResponse(
        metric_name=m.name,
        classification=CLASS_TAGS[curve.classification],
        orientation=curve.orientation_sign,
        mean_radius=float(np.mean(curve.radii()[:-1])),
        max_normalized_form=float(np.max(np.abs(forms))),
        n_rays=req.rays,
        char_tol=req.char_tol,
        curve=_curve_payload(curve.thetas(), curve.positions()),
        normalized_forms=[float(f) for f in forms],
    )


# ------------------------------------------------------------------ geodesic


class GeodesicRequest(BaseModel):
    metric: MetricSpec
    x0: list[float]
    xi: list[float]
    family: Literal["plus", "minus"] = "plus"
    direction: Literal["forward", "backward"] = "forward"
    t_max: float = Field(10.0, gt=0)
    rtol: float = Field(1e-9, gt=0)
    atol: float = Field(1e-12, gt=0)


class GeodesicResponse(BaseModel):
    metric_name: str
    termination: str
    n_samples: int
    max_H_drift: float
    t: list[float]
    x: list[list[float]]
    xi: list[list[float]]
    xi0: list[float]


def run_geodesic(req: GeodesicRequest) -> GeodesicResponse:
    m = req.metric.build()
    if len(req.x0) != m.n or len(req.xi) != m.n:
        raise ParameterError(
            f"metric has {m.n} spatial dimensions; x0 and xi need {m.n} entries"
        )
    x = np.asarray(req.x0, dtype=float)
    xi = np.asarray(req.xi, dtype=float)
    hi, lo = geodesics.solve_xi0(m, x, xi)
    state = geodesics.GeodesicState(
        x0=0.0, x=x, xi=xi, family=req.family,
        xi0=hi if req.family == "plus" else lo,
    )
    sol = geodesics.flow(
        m, state, direction=req.direction, t_max=req.t_max,
        rtol=req.rtol, atol=req.atol,
    )
    t, xs, xis, xi0s = sol.arrays()
    return GeodesicResponse(
        metric_name=m.name,
        termination=sol.termination,
        n_samples=len(t),
        max_H_drift=float(sol.max_H_drift),
        t=[float(v) for v in t],
        x=[[float(v) for v in row] for row in xs],
        xi=[[float(v) for v in row] for row in xis],
        xi0=[float(v) for v in xi0s],
    )


# ------------------------------------------------------------------- horizon


class HorizonRequest(BaseModel):
    metric: MetricSpec
    seed: Optional[tuple[float, float]] = None
    bracket: Optional[tuple[float, float]] = None
    tol: float = Field(1e-6, gt=0)
    n_theta: int = Field(256, ge=16)
    theta_star: float = 0.0
    rays: int = Field(256, ge=16)
    char_tol: float = Field(1e-6, gt=0)


class HorizonResponse(BaseModel):
    metric_name: str
    status: Literal["ok", "characteristic_boundary", "mixed_boundary"]
    message: str
    classification: Literal["characteristic", "non_characteristic", "mixed"]
    orientation: Literal["black_hole", "white_hole", "indefinite"]
    rho_star: Optional[float] = None
    residual: Optional[float] = None
    curve: Optional[CurvePayload] = None
    ergosphere_mean_radius: float


def run_horizon(req: HorizonRequest) -> HorizonResponse:
    m = req.metric.build()
    seed = _resolve_seed(m, req.seed)
    curve = ergosphere.trace_ergosphere(
        m, seed, n_rays=req.rays, char_tol=req.char_tol
    )
    tag = CLASS_TAGS[curve.classification]
    mean_radius = float(np.mean(curve.radii()[:-1]))
    if tag == "characteristic":
        return HorizonResponse(
            metric_name=m.name,
            status="characteristic_boundary",
            message=SCHWARZSCHILD_TYPE_MESSAGE,
            classification=tag,
            orientation=curve.orientation_sign,
            ergosphere_mean_radius=mean_radius,
        )
    if tag == "mixed":
        return HorizonResponse(
            metric_name=m.name,
            status="mixed_boundary",
            message="mixed boundary: partly characteristic, partly not; "
            "the limit-cycle construction does not apply",
            classification=tag,
            orientation=curve.orientation_sign,
            ergosphere_mean_radius=mean_radius,
        )
    bracket = req.bracket if req.bracket is not None else (None, None)
    cyc = horizon.find_limit_cycle(
        m, theta_star=req.theta_star, bracket=bracket, tol=req.tol,
        n_theta=req.n_theta,
    )
    # close the polyline so every curve payload shares one convention
    thetas = np.append(cyc.thetas, 2.0 * np.pi)
    pos = cyc.positions()
    pos = np.vstack([pos, pos[:1]])
    return HorizonResponse(
        metric_name=m.name,
        status="ok",
        message="limit cycle located",
        classification=tag,
        orientation=curve.orientation_sign,
        rho_star=float(cyc.record.fixed_point),
        residual=float(cyc.residual),
        curve=_curve_payload(thetas, pos),
        ergosphere_mean_radius=mean_radius,
    )


# ---------------------------------------------------------------- charcoords


class CharcoordsRequest(BaseModel):
    metric: MetricSpec
    seed: Optional[tuple[float, float]] = None
    rays: int = Field(256, ge=16)
    depth: float = Field(1.05, gt=0)
    n_rho: int = Field(64, ge=16)
    n_theta: int = Field(256, ge=16)
    field_rho: int = Field(128, ge=16)
    field_theta: int = Field(256, ge=16)
    oversample: int = Field(2, ge=1)
    bracket: Optional[tuple[float, float]] = None
    tol: float = Field(1e-8, gt=0)
    char_tol: float = Field(1e-6, gt=0)


class FoldReport(BaseModel):
    fold_free: bool
    jacobian_sign: float
    n_cells: int
    n_fold_cells: int


class CharcoordsResponse(BaseModel):
    metric_name: str
    status: Literal["ok", "characteristic_boundary", "mixed_boundary"]
    message: str
    classification: Literal["characteristic", "non_characteristic", "mixed"]
    c1: Optional[float] = None
    c1_r_squared: Optional[float] = None
    c1_window: Optional[tuple[float, float]] = None
    cap: Optional[float] = None
    depth_sign: Optional[float] = None
    fold: Optional[FoldReport] = None
    horizon_rho_star: Optional[float] = None
    rho_grid: Optional[list[float]] = None
    theta_grid: Optional[list[float]] = None
    S_plus: Optional[list[list[float]]] = None
    S_minus: Optional[list[list[float]]] = None
    delta_tilde: Optional[list[list[float]]] = None
    y1: Optional[list[list[float]]] = None
    y2: Optional[list[list[float]]] = None


def run_charcoords(req: CharcoordsRequest) -> CharcoordsResponse:
    m = req.metric.build()
    seed = _resolve_seed(m, req.seed)
    curve = ergosphere.trace_ergosphere(
        m, seed, n_rays=req.rays, char_tol=req.char_tol
    )
    tag = CLASS_TAGS[curve.classification]
    if tag == "characteristic":
        return CharcoordsResponse(
            metric_name=m.name,
            status="characteristic_boundary",
            message=SCHWARZSCHILD_TYPE_MESSAGE
            + "; the strip between them is empty",
            classification=tag,
        )
    if tag == "mixed":
        return CharcoordsResponse(
            metric_name=m.name,
            status="mixed_boundary",
            message="mixed boundary: characteristic coordinates need a "
            "uniformly non-characteristic ergosphere",
            classification=tag,
        )
    _chart, pb = charcoords.build_collar(
        m, curve, depth=req.depth, n_rho=req.n_rho, n_theta=req.n_theta
    )
    cyc = None
    if req.bracket is not None:
        cyc = horizon.find_limit_cycle(m, bracket=req.bracket, tol=req.tol)
    field = charcoords.build_char_field(
        pb, cyc, n_rho=req.field_rho, n_theta=req.field_theta,
        oversample=req.oversample,
    )
    hp = charcoords.half_plane_map(field)
    return CharcoordsResponse(
        metric_name=m.name,
        status="ok",
        message="characteristic field transported",
        classification=tag,
        c1=float(field.c1),
        c1_r_squared=float(field.c1_r_squared),
        c1_window=(float(field.c1_window[0]), float(field.c1_window[1])),
        cap=float(field.rho_grid[-1]),
        depth_sign=float(hp.depth_sign),
        fold=FoldReport(
            fold_free=hp.report.fold_free,
            jacobian_sign=float(hp.report.jacobian_sign),
            n_cells=hp.report.n_cells,
            n_fold_cells=len(hp.report.fold_cells),
        ),
        horizon_rho_star=(
            float(cyc.record.fixed_point) if cyc is not None else None
        ),
        rho_grid=[float(v) for v in field.rho_grid],
        theta_grid=[float(v) for v in field.theta_grid],
        S_plus=[[float(v) for v in row] for row in field.S_plus],
        S_minus=[[float(v) for v in row] for row in field.S_minus],
        delta_tilde=[[float(v) for v in row] for row in field.delta_tilde],
        y1=[[float(v) for v in row] for row in hp.y1],
        y2=[[float(v) for v in row] for row in hp.y2],
    )


# ---------------------------------------------------------------------- kerr


class KerrRequest(BaseModel):
    m: float = Field(1.0, gt=0)
    a: float = 0.5
    n_samples: int = Field(256, ge=16)
    char_tol: float = Field(1e-6, gt=0)


class SurfacePayload(BaseModel):
    r_level: float
    ellipse_deviation: float
    classification: Literal["characteristic", "non_characteristic", "mixed"]
    orientation: Literal["black_hole", "white_hole", "indefinite"]
    max_normalized_form: float
    angles: list[float]
    positions: list[list[float]]  # (rho, z), closed


class KerrResponse(BaseModel):
    m: float
    a: float
    r_plus: float
    r_minus: float
    outer: SurfacePayload
    inner: SurfacePayload


def _surface_payload(curve, check):
    return SurfacePayload(
        r_level=float(curve.r_level),
        ellipse_deviation=float(curve.ellipse_deviation),
        classification=CLASS_TAGS[check.classification],
        orientation=check.orientation,
        max_normalized_form=float(check.max_normalized_form),
        angles=[float(t) for t in curve.angles],
        positions=[[float(v) for v in p] for p in curve.positions],
    )


def run_kerr(req: KerrRequest) -> KerrResponse:
    surfaces = axisym.kerr_ergosurfaces(req.m, req.a, n_samples=req.n_samples)
    m2 = kerr_restricted(req.m, req.a)
    chk_out = axisym.verify_characteristic(
        m2, surfaces.outer.positions[:-1], char_tol=req.char_tol
    )
    chk_in = axisym.verify_characteristic(
        m2, surfaces.inner.positions[:-1], char_tol=req.char_tol
    )
    return KerrResponse(
        m=req.m,
        a=req.a,
        r_plus=float(surfaces.r_plus),
        r_minus=float(surfaces.r_minus),
        outer=_surface_payload(surfaces.outer, chk_out),
        inner=_surface_payload(surfaces.inner, chk_in),
    )


# ----------------------------------------------------------------------- app


def create_app():
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse

    app = FastAPI(
        title="horizon-lab",
        version=__version__,
        description="Ergospheres, event horizons, and characteristic "
        "coordinates for stationary metrics.",
    )

    @app.exception_handler(HorizonLabError)
    async def _domain_error(request, exc):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/ergosphere", response_model=ErgosphereResponse)
    async def _ergosphere(req: ErgosphereRequest):
        return run_ergosphere(req)

    @app.post("/v1/classify", response_model=ErgosphereResponse)
    async def _classify(req: ErgosphereRequest):
        return run_ergosphere(req)

    @app.post("/v1/geodesic", response_model=GeodesicResponse)
    async def _geodesic(req: GeodesicRequest):
        return run_geodesic(req)

    @app.post("/v1/horizon", response_model=HorizonResponse)
    async def _horizon(req: HorizonRequest):
        return run_horizon(req)

    @app.post("/v1/charcoords", response_model=CharcoordsResponse)
    async def _charcoords(req: CharcoordsRequest):
        return run_charcoords(req)

    @app.post("/v1/kerr", response_model=KerrResponse)
    async def _kerr(req: KerrRequest):
        return run_kerr(req)

    return app


app = create_app()
