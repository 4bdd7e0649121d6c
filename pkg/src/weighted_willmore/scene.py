"""Scene files: JSON description of an ambient, a body and numeric settings."""
import json
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .ambient import PROFILES, WEIGHTS, WeightedAmbient
from .errors import ConfigurationError
from .hypersurface import Ellipsoid, Hypersurface, QuadricGraph, Sphere
from .setup import ProblemSetup

SCHEMA_VERSION = 1
THEOREM_IDS = ("thm12a", "thm12b", "thm13", "thm14", "prop25", "prop26", "thm61", "thm62")
CONSTANT_WEIGHTS = ("zero", "constant")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CatalogRef(_Strict):
    id: str
    params: dict = Field(default_factory=dict)


class AmbientSpec(_Strict):
    model: Literal["flat", "radial_warped", "product_cylinder"] = "flat"
    n: int = Field(ge=2, le=8)
    profile: Optional[CatalogRef] = None
    weight: CatalogRef = Field(default_factory=lambda: CatalogRef(id="zero"))
    a: float = Field(default=0.0, ge=0.0)
    k: float = Field(default=0.0, ge=0.0)
    m: Optional[float] = None
    fiber_radius: float = Field(default=1.0, gt=0.0)
    length: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _catalog(self):
        if self.weight.id not in WEIGHTS:
            raise ValueError(f"unknown weight id {self.weight.id!r}; known: {sorted(WEIGHTS)}")
        if self.model == "radial_warped":
            if self.profile is None:
                raise ValueError("radial_warped ambient needs a profile")
            if self.profile.id not in PROFILES:
                raise ValueError(f"unknown profile id {self.profile.id!r}; known: {sorted(PROFILES)}")
        elif self.profile is not None:
            raise ValueError("profile is only meaningful for radial_warped ambients")
        if self.m is not None:
            if self.m < self.n:
                raise ValueError("m must be >= n")
            if self.m == self.n and self.weight.id not in CONSTANT_WEIGHTS:
                raise ValueError("m = n requires a constant weight")
        return self


class HypersurfaceSpec(_Strict):
    kind: Literal["sphere", "ellipsoid", "quadric_graph", "coordinate_sphere"]
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(default=None, gt=0.0)
    axes: Optional[List[float]] = None
    base_radius: Optional[float] = Field(default=None, gt=0.0)
    matrix: Optional[List[List[float]]] = None
    orientation: Literal[1, -1] = 1

    @model_validator(mode="after")
    def _fields(self):
        need = {"sphere": ("radius",), "ellipsoid": ("axes",),
                "quadric_graph": ("base_radius", "matrix"), "coordinate_sphere": ("radius",)}
        for name in need[self.kind]:
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind} needs field {name!r}")
        if self.axes is not None and any(a <= 0 for a in self.axes):
            raise ValueError("ellipsoid axes must be positive")
        return self


class ScheduleSpec(_Strict):
    base: float = Field(gt=0.0)
    ratio: float = Field(default=2.0, gt=1.0)
    count: int = Field(default=7, ge=6, le=16)


class NumericsSpec(_Strict):
    resolution: int = Field(default=24, ge=4, le=128)
    schedule: Optional[ScheduleSpec] = None
    ode_rtol: float = Field(default=1e-10, gt=0.0, le=1e-6)
    ray_max: float = Field(default=100.0, gt=0.0, le=1e4)
    mc_samples: int = Field(default=0, ge=0, le=100_000_000)
    seed: int = Field(default=42, ge=0)
    eq_tol: float = Field(default=1e-3, gt=0.0, lt=1.0)
    avr_center: Optional[List[float]] = None


class Scene(_Strict):
    schema_version: int
    name: str
    description: str = ""
    ambient: AmbientSpec
    hypersurface: HypersurfaceSpec
    numerics: NumericsSpec = Field(default_factory=NumericsSpec)
    theorems: List[Literal["thm12a", "thm12b", "thm13", "thm14",
                           "prop25", "prop26", "thm61", "thm62"]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _cross(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        n = self.ambient.n
        hs = self.hypersurface
        for name in ("center", "axes"):
            v = getattr(hs, name)
            if v is not None and len(v) != n:
                raise ValueError(f"hypersurface.{name} must have length n = {n}")
        if hs.matrix is not None and (len(hs.matrix) != n or any(len(r) != n for r in hs.matrix)):
            raise ValueError(f"hypersurface.matrix must be {n} x {n}")
        if self.numerics.avr_center is not None and len(self.numerics.avr_center) != n:
            raise ValueError(f"numerics.avr_center must have length n = {n}")
        if self.ambient.model == "flat" and hs.kind == "coordinate_sphere":
            raise ValueError("flat scenes use sphere/ellipsoid/quadric_graph bodies")
        if self.ambient.model != "flat" and hs.kind != "coordinate_sphere":
            raise ValueError("curved scenes use coordinate_sphere bodies")
        needs_m = [t for t in self.theorems if t in ("thm13", "thm62", "prop25")]
        if needs_m and self.ambient.m is None:
            raise ValueError(f"theorems {needs_m} require ambient.m")
        return self

    def resolved(self):
        """Plain dict with all defaults filled."""
        return self.model_dump(mode="json")


def format_validation_error(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def scene_from_dict(data):
    try:
        return Scene.model_validate(data)
    except ValidationError as err:
        raise ConfigurationError(format_validation_error(err)) from None


def shipped_scenes():
    root = resources.files("weighted_willmore") / "scenes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_text(path):
    p = Path(path)
    if p.exists():
        return p.read_text()
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    res = resources.files("weighted_willmore") / "scenes" / name
    if res.is_file():
        return res.read_text()
    raise ConfigurationError(f"scene file {path!r} not found (shipped: {', '.join(shipped_scenes())})")


def load_scene(path):
    """Load a scene from a path or the name of a shipped scene."""
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"invalid JSON in {path}: {err}") from None
    return scene_from_dict(data)


def build_ambient(spec: AmbientSpec):
    weight = WEIGHTS[spec.weight.id](**spec.weight.params)
    profile = PROFILES[spec.profile.id](**spec.profile.params) if spec.profile else None
    try:
        return WeightedAmbient(spec.n, weight, spec.model, profile=profile,
                               fiber_radius=spec.fiber_radius, length=spec.length,
                               m_synthetic=spec.m)
    except TypeError as err:
        raise ConfigurationError(f"bad catalog parameters: {err}") from None


def build_hypersurface(spec: HypersurfaceSpec, n):
    center = np.zeros(n) if spec.center is None else np.asarray(spec.center, float)
    if spec.kind == "coordinate_sphere":
        return Hypersurface("coordinate_sphere", radius=spec.radius, orientation=spec.orientation)
    if spec.kind == "sphere":
        shape = Sphere(center, spec.radius)
    elif spec.kind == "ellipsoid":
        shape = Ellipsoid(center, spec.axes)
    else:
        shape = QuadricGraph(center, spec.base_radius, spec.matrix)
    return Hypersurface("radial_graph", shape=shape, orientation=spec.orientation)


def build_setup(scene: Scene, threads=1, seed=None, eq_tol=None):
    amb = build_ambient(scene.ambient)
    hyp = build_hypersurface(scene.hypersurface, scene.ambient.n)
    num = scene.numerics
    sched = None
    if num.schedule is not None:
        sched = num.schedule.base * num.schedule.ratio ** np.arange(num.schedule.count)
    return ProblemSetup(amb, hyp, resolution=num.resolution, a=scene.ambient.a, k=scene.ambient.k,
                        m=scene.ambient.m, schedule=sched, avr_center=num.avr_center,
                        ray_max=num.ray_max, eq_tol=num.eq_tol if eq_tol is None else eq_tol,
                        mc_samples=num.mc_samples, seed=num.seed if seed is None else seed,
                        threads=threads, name=scene.name,
                        extra={"ode_rtol": num.ode_rtol})
