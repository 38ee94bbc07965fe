"""Scenario configuration with a lossless JSON round trip."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .meshing import CavityShape, CellGeometry
from .pml import MaterialParams, PmlProfile, PMLValidationError, validate
from .solve import METHODS
from .spectral import IncidentWave

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class GeometryConfig:
    lattice: float = 1.0
    h1: float = 0.5
    h2: float = -0.5
    dh1: float = 2.5
    dh2: float = 2.5
    cavity: str = "circle"
    radius: float = 0.3
    center: list = field(default_factory=lambda: [0.5, 0.0])
    vertices: list = field(default_factory=list)


@dataclass
class WaveConfig:
    kappa: float = math.pi
    theta: float = math.pi / 3


@dataclass
class PmlConfig:
    sigma1: float = 14.0
    sigma2: float = 5.0
    m: int = 4


@dataclass
class DiscretizationConfig:
    h: float = 0.05
    quad_degree: int = 6
    eta_re: float = 0.001
    eta_im: float = 0.001
    n_modes: int = 20
    seed: int = 0
    qp_penalty_form: str = "equations"
    decoupled_source_weight: str = "plain"


@dataclass
class ScenarioConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    wave: WaveConfig = field(default_factory=WaveConfig)
    mu: float = 0.5
    pml: PmlConfig = field(default_factory=PmlConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    methods: list = field(default_factory=lambda: list(METHODS))
    output_dir: str = "out"
    allow_invalid_pml: bool = False

    # derived objects -------------------------------------------------
    @property
    def eta(self) -> complex:
        return complex(self.discretization.eta_re, self.discretization.eta_im)

    def cell(self) -> CellGeometry:
        g = self.geometry
        return CellGeometry(g.lattice, g.h1, g.h2, g.dh1, g.dh2)

    def cavity_shape(self) -> CavityShape:
        g = self.geometry
        return CavityShape(kind=g.cavity, radius=g.radius, center=tuple(g.center),
                           vertices=tuple(tuple(v) for v in g.vertices))

    def profile(self) -> PmlProfile:
        g, p = self.geometry, self.pml
        return PmlProfile(g.h1, g.h2, g.dh1, g.dh2, p.sigma1, p.sigma2, p.m)

    def incident(self) -> IncidentWave:
        return IncidentWave(self.wave.kappa, self.wave.theta)

    def material(self) -> MaterialParams:
        return MaterialParams(self.wave.kappa, self.mu)

    # validation ------------------------------------------------------
    def validate(self) -> None:
        d = self.discretization
        if not d.h > 0:
            raise ConfigError(f"mesh size must be positive, got {d.h}")
        if d.quad_degree < 1:
            raise ConfigError("quadrature degree must be at least 1")
        if d.eta_re < 0:
            raise ConfigError("penalty parameter needs a non-negative real part")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if d.qp_penalty_form not in ("equations", "display"):
            raise ConfigError(f"unknown qp_penalty_form {d.qp_penalty_form!r}")
        if d.decoupled_source_weight not in ("plain", "sigma"):
            raise ConfigError(f"unknown decoupled_source_weight {d.decoupled_source_weight!r}")
        try:
            self.incident()
            report = validate(self.profile(), self.material())
        except (ValueError, PMLValidationError) as exc:
            raise ConfigError(str(exc)) from None
        if not report.ok and not self.allow_invalid_pml:
            raise ConfigError(
                "PML parameters violate the admissibility condition "
                f"1 + sigma1 > sqrt((3+mu)/(1-mu)) sigma2 with m > 3: {report.message} "
                "(pass --allow-invalid-pml to override)")

    # serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out["schema_version"] = SCHEMA_VERSION
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        sections = {"geometry": GeometryConfig, "wave": WaveConfig, "pml": PmlConfig,
                    "discretization": DiscretizationConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                sub = sections[key]
                sub_known = {f.name for f in fields(sub)}
                extra = set(value) - sub_known
                if extra:
                    raise ConfigError(f"unknown keys in {key}: {sorted(extra)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        return cls.from_dict(data)
