"""Validated run configuration for the CLI and the HTTP service.

One JSON-compatible tree describes a whole run: obstacle shape, boundary
condition, incident wave, lattice, and numerical knobs.  Everything is
checked here, before any array gets allocated, so a bad config fails in
milliseconds with a named key.  Angle convention: the incident direction
is k_vec = k (cos(theta) cos(phi), cos(theta) sin(phi), sin(theta)), so
theta < 0 travels downward; all angles are radians.
"""

from __future__ import annotations

import json
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .geometry import GeneratingCurve, make_curve
from .onebody import IncidentWave
from .periodizer import Lattice
from .solver import PeriodicParams

FORMAT_VERSION = "axiscat/1"


class ShapeSpec(BaseModel):
    """Obstacle generating curve; parameters depend on the shape tag."""

    model_config = ConfigDict(extra="forbid")

    shape: Literal["smooth", "wiggly", "sphere", "cup"]
    radius: Optional[float] = Field(None, gt=0, description="sphere radius")
    a: Optional[float] = Field(None, gt=0, description="cup half-thickness")
    b: Optional[float] = Field(None, gt=0, description="cup opening half-angle")
    scale: Optional[float] = Field(None, gt=0,
                                   description="uniform size multiplier")

    @model_validator(mode="after")
    def _check_params(self):
        if self.shape == "sphere" and self.radius is None:
            raise ValueError("sphere needs a radius")
        if self.shape != "sphere" and self.radius is not None:
            raise ValueError("radius only applies to the sphere shape")
        if self.shape != "cup" and (self.a is not None or self.b is not None):
            raise ValueError("a and b only apply to the cup shape")
        if self.shape == "sphere" and self.scale is not None:
            raise ValueError("scale a sphere through its radius")
        return self

    def build(self) -> GeneratingCurve:
        kw = {}
        if self.shape == "sphere":
            kw["radius"] = self.radius
        if self.shape == "cup":
            if self.a is not None:
                kw["a"] = self.a
            if self.b is not None:
                kw["b"] = self.b
        if self.scale is not None:
            kw["scale"] = self.scale
        return make_curve(self.shape, **kw)


class IncidentSpec(BaseModel):
    """Incident plane wave, by (k, theta, phi) or an explicit wavevector."""

    model_config = ConfigDict(extra="forbid")

    k: Optional[float] = Field(None, gt=0)
    theta: Optional[float] = None
    phi: float = 0.0
    k_vec: Optional[Tuple[float, float, float]] = None
    k_minus: Optional[float] = Field(None, gt=0,
                                     description="interior wavenumber")
    amplitude_re: float = 1.0
    amplitude_im: float = 0.0

    @model_validator(mode="after")
    def _check_direction(self):
        by_angles = self.k is not None and self.theta is not None
        by_vector = self.k_vec is not None
        if by_angles == by_vector:
            raise ValueError(
                "give either (k, theta[, phi]) or k_vec, not both or neither")
        if by_vector and float(np.linalg.norm(self.k_vec)) <= 0:
            raise ValueError("k_vec must be nonzero")
        return self

    def build(self) -> IncidentWave:
        amp = complex(self.amplitude_re, self.amplitude_im)
        if self.k_vec is not None:
            return IncidentWave(tuple(self.k_vec), self.k_minus, amp)
        return IncidentWave.from_angles(self.k, self.theta, self.phi,
                                        k_minus=self.k_minus, amplitude=amp)


class LatticeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    e_x: float = Field(..., gt=0)
    e_y: float = Field(..., gt=0)

    def build(self) -> Lattice:
        return Lattice(self.e_x, self.e_y)


class NumericsSpec(BaseModel):
    """Discretization sizes; None picks the documented automatic value."""

    model_config = ConfigDict(extra="forbid")

    N: int = Field(..., gt=0, description="source rings")
    P: int = Field(..., gt=0, description="azimuthal modes (even)")
    M: Optional[int] = Field(None, gt=0, description="boundary rings")
    q: Optional[int] = Field(None, gt=0,
                             description="ring quadrature nodes for both the "
                             "self and image interactions")
    tau: float = Field(0.1, description="source displacement")
    scheme: Literal["normal_const", "normal_speed", "complexified"] = \
        "complexified"
    p: int = Field(24, ge=0, description="auxiliary harmonic degree")
    n0: int = Field(13, gt=0, description="plane-wave order cutoff")
    m1: Optional[int] = Field(None, gt=0, description="wall nodes per side")
    z0: Optional[float] = Field(None, gt=0, description="wall half-height")
    gmres_tol: float = Field(1e-12, gt=0)
    gmres_maxit: int = Field(300, gt=0)
    svd_tol: float = Field(1e-10, gt=0)
    storage: Literal["auto", "dense", "memmap"] = "auto"

    @model_validator(mode="after")
    def _check(self):
        if self.P % 2:
            raise ValueError("P must be even")
        if self.q is not None and self.q < self.P:
            raise ValueError("q must be at least P")
        if 2 * self.p >= self.P:
            raise ValueError("need P > 2p so the auxiliary basis maps onto "
                             "retained modes")
        return self

    def build(self) -> PeriodicParams:
        return PeriodicParams(
            N=self.N, P=self.P, M=self.M, q_self=self.q, q_dist=self.q,
            tau=self.tau, scheme=self.scheme, p=self.p, n0=self.n0,
            m1=self.m1, z0=self.z0, gmres_tol=self.gmres_tol,
            gmres_maxit=self.gmres_maxit, svd_tol=self.svd_tol,
            storage=self.storage,
        )


class FieldSliceSpec(BaseModel):
    """Axis-aligned evaluation plane for the field command."""

    model_config = ConfigDict(extra="forbid")

    plane: Literal["xy", "xz", "yz"] = "xz"
    offset: float = 0.0
    lo1: float = -0.5
    hi1: float = 0.5
    lo2: float = -0.5
    hi2: float = 0.5
    n1: int = Field(40, gt=1)
    n2: int = Field(40, gt=1)

    def points(self) -> np.ndarray:
        u = np.linspace(self.lo1, self.hi1, self.n1)
        v = np.linspace(self.lo2, self.hi2, self.n2)
        U, V = np.meshgrid(u, v, indexing="ij")
        flat_u, flat_v = U.ravel(), V.ravel()
        off = np.full_like(flat_u, self.offset)
        cols = {"xy": (flat_u, flat_v, off),
                "xz": (flat_u, off, flat_v),
                "yz": (off, flat_u, flat_v)}[self.plane]
        return np.column_stack(cols)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    result_path: Optional[str] = None
    field_path: Optional[str] = None
    field_slice: Optional[FieldSliceSpec] = None


class RunConfig(BaseModel):
    """Everything needed to reproduce a periodic scattering run."""

    model_config = ConfigDict(extra="forbid")

    shape: ShapeSpec
    bc: Literal["neumann", "transmission"] = "neumann"
    incident: IncidentSpec
    lattice: LatticeSpec
    numerics: NumericsSpec
    outputs: Optional[OutputSpec] = None

    @model_validator(mode="after")
    def _check_bc(self):
        if self.bc == "transmission" and self.incident.k_minus is None:
            raise ValueError("transmission runs need incident.k_minus")
        return self


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.model_validate(json.load(fh))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """New config with dotted-path overrides applied, re-validated.

    Keys look like "numerics.P" or "incident.theta"; values are parsed
    as JSON when possible and fall back to plain strings, so both
    --set numerics.P=60 and --set shape.shape=cup work.
    """
    tree = cfg.model_dump(exclude_none=True)
    for key, raw in overrides.items():
        if isinstance(raw, str):
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
        else:
            value = raw
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"cannot descend into {key!r}")
        node[parts[-1]] = value
    return RunConfig.model_validate(tree)
