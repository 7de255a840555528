"""Run configuration: one YAML file of key-value sections driving every command.

Sections mirror the package layout (geometry, physics, estimator, planner,
executor, experiment). Unknown keys are rejected so typos fail loudly, and a
short hash of the canonical content is stamped into every output for
reproducibility.
"""
from __future__ import annotations

import dataclasses
import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field

import yaml

from .dynamics import DEFAULT_STEP, PhysicsParams
from .errors import ParseError
from .estimator import BOUNCE_BAND_M, DETECT_LOOKAHEAD, MIN_FIT_COUNT, WINDOW_CAPACITY
from .geometry import TableGeometry


@dataclass
class EstimatorConfig:
    window: int = WINDOW_CAPACITY
    min_fit_count: int = MIN_FIT_COUNT
    bounce_band: float = BOUNCE_BAND_M
    lookahead: int = DETECT_LOOKAHEAD


@dataclass
class PlannerConfig:
    dt_flight: float = 0.5        # commanded return flight duration
    reach_offset: float = 0.25    # lateral base offset from the strike point
    base_back_offset: float = 0.4 # base distance behind the hit plane
    lock_time: float = 0.5        # command freeze horizon before the strike


@dataclass
class ExecutorSection:
    reach_curve: list = field(default_factory=lambda: [[0.0, 0.0], [0.75, 0.8]])
    max_reach_radius: float = 0.9
    swing_duration: float = 0.86
    position_error_sigma: float = 0.02
    velocity_error_sigma: float = 0.08
    timing_jitter_sigma: float = 0.004
    racket_radius: float = 0.075
    contact_band: float = 0.02
    base_start: list = field(default_factory=lambda: [-1.77, 0.0])


@dataclass
class LaunchSection:
    x: float = 1.2
    y: float = 0.0
    z: float = 0.8
    bounce_x: float = -0.65
    target_y: float = 0.0
    target_z: float = 0.35
    target_sigma_y: float = 0.0
    target_sigma_z: float = 0.0
    position_sigma: float = 0.0
    velocity_sigma: float = 0.0


@dataclass
class GridSection:
    cell: float = 0.2
    # Row layout approximating the 26-ball coverage: z centers with cell
    # counts, spanning the band a no-spin single-bounce feed can reach.
    rows: list = field(default_factory=lambda: [
        {"z": 0.25, "count": 7},
        {"z": 0.45, "count": 7},
        {"z": 0.65, "count": 6},
        {"z": 0.85, "count": 6},
    ])


@dataclass
class ExperimentConfig:
    seed: int = 0
    noise_sigma: float = 0.001
    plan_stride: int = 1
    step: float = DEFAULT_STEP
    trials: int = 20
    max_shots: int = 120
    launch: LaunchSection = field(default_factory=LaunchSection)
    grid: GridSection = field(default_factory=GridSection)


@dataclass
class GeometrySection:
    length_x: float = 2.74
    width_y: float = 1.525
    surface_height: float = 0.76
    net_height: float = 0.1525
    hit_plane_x: float | None = None
    landing_target: list = field(default_factory=lambda: [0.685, 0.0, 0.0])


@dataclass
class PhysicsSection:
    k: float = 0.115
    c_h: float = 0.75
    c_v: float = 0.93
    c_r: float = 0.8
    c_r_calibrated: bool = False
    g: list = field(default_factory=lambda: [0.0, 0.0, -9.81])


_SECTION_TYPES = {
    "geometry": GeometrySection,
    "physics": PhysicsSection,
    "estimator": EstimatorConfig,
    "planner": PlannerConfig,
    "executor": ExecutorSection,
    "experiment": ExperimentConfig,
}


@dataclass
class RunConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    executor: ExecutorSection = field(default_factory=ExecutorSection)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def table_geometry(self) -> TableGeometry:
        g = self.geometry
        return TableGeometry(g.length_x, g.width_y, g.surface_height, g.net_height,
                             g.hit_plane_x, g.landing_target)

    def physics_params(self) -> PhysicsParams:
        p = self.physics
        return PhysicsParams(k=p.k, c_h=p.c_h, c_v=p.c_v, c_r=p.c_r, g=p.g)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Short stable digest of the full configuration."""
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _fill_section(cls, data: dict, path: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ParseError(f"unknown config key {path}.{key!r}")
        ftype = known[key].type
        if key == "launch":
            value = _fill_section(LaunchSection, _as_map(value, f"{path}.{key}"), f"{path}.{key}")
        elif key == "grid":
            value = _fill_section(GridSection, _as_map(value, f"{path}.{key}"), f"{path}.{key}")
        kwargs[key] = value
    return cls(**kwargs)


def _as_map(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ParseError(f"config section {path!r} must be a mapping")
    return value


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    sections = {}
    for name, value in data.items():
        if name not in _SECTION_TYPES:
            raise ParseError(f"unknown config section {name!r}")
        sections[name] = _fill_section(_SECTION_TYPES[name], _as_map(value, name), name)
    return RunConfig(**sections)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ParseError(f"invalid config YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config root must be a mapping of sections")
    return config_from_dict(data)


def save_config(path, config: RunConfig, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


def default_config() -> RunConfig:
    """Configuration with the bundled identified physics parameters.

    The bundled values come from running the `fit` pipeline on synthetic
    launches (see data/default_params.yaml for the exact recipe); they are not
    hand-picked truth.
    """
    ref = importlib.resources.files("rallysim").joinpath("data/default_params.yaml")
    with ref.open("r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    cfg = RunConfig()
    cfg.physics = _fill_section(PhysicsSection, _as_map(data.get("physics", {}), "physics"), "physics")
    return cfg
