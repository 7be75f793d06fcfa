"""Generator configuration: flat `key = value` text files with defaults.

The format is deliberately diff-friendly: one key per line, `#` comments,
lists as comma-separated values with optional brackets.  Unknown keys are
rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass(frozen=True)
class GeneratorConfig:
    # Core run controls
    master_seed: int = 0
    scene_count: int = 100
    resolution: int = 1024
    scene_scale: float = 10.0
    output_dir: str = "out"
    workers: int = 1
    write_run_report: bool = True

    # Counted-object sampling
    count_range: tuple[int, int] = (30, 200)
    class_count_range: tuple[int, int] = (2, 4)
    target_size_range: tuple[float, float] = (0.045, 0.12)  # fraction of scene_scale
    size_jitter_range: tuple[float, float] = (0.98, 1.02)

    # Class derivation
    derive_resized_prob: float = 0.3
    derive_same_category_prob: float = 0.5
    derive_other_category_prob: float = 0.2
    resize_factor_range: tuple[float, float] = (1.25, 1.75)

    # Spawn volume
    spawn_margin: float = 0.04            # fraction of scene_scale
    spawn_height_range: tuple[float, float] = (0.1, 1.5)   # fraction of scene_scale
    spawn_xy_range: tuple[float, float] = (-0.3, 0.3)      # fraction of scene_scale

    # Catalog
    catalog_size: int = 120
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    exemplar_resolution: int = 256

    # Scene context
    container_probability: float = 0.7
    container_extent_range: tuple[float, float] = (0.30, 0.55)  # interior half-extent, x scene_scale
    container_axis_scale_range: tuple[float, float] = (0.8, 1.25)
    container_wall_height_range: tuple[float, float] = (0.05, 0.12)  # fraction of scene_scale
    floor_extent_range: tuple[float, float] = (0.8, 1.4)    # half-extent, fraction of scene_scale
    floor_thickness_range: tuple[float, float] = (0.05, 0.15)
    uv_scale_range: tuple[float, float] = (0.04, 0.1)

    # Distractors
    distractor_count_range: tuple[int, int] = (2, 8)
    distractor_base_scale: float = 0.7     # fraction of scene_scale
    distractor_scale_multiplier_range: tuple[float, float] = (0.5, 1.2)
    distractor_margin: float = 0.02        # fraction of scene_scale
    distractor_max_attempts: int = 100

    # Physics settling
    settle_max_steps: int = 300
    settle_substeps: int = 2
    settle_solver_iterations: int = 4
    settle_gravity: float = 9.81
    settle_restitution: float = 0.0
    settle_penetration_tolerance: float = 0.01  # world units

    # Camera
    camera_elevation_range_deg: tuple[float, float] = (20.0, 80.0)
    camera_roll_range_deg: tuple[float, float] = (-15.0, 15.0)
    camera_distance_factor: float = 1.2
    camera_radius_jitter: float = 0.15
    camera_fov_deg: float = 50.0
    camera_lookat_jitter: float = 0.05     # fraction of the framing AABB diagonal

    # Lighting / shading
    light_count_range: tuple[int, int] = (1, 3)
    light_intensity_range: tuple[float, float] = (0.4, 1.3)
    ambient_range: tuple[float, float] = (0.1, 0.5)
    supersample_rgb: bool = False

    # Visibility filtering
    visibility_occlusion_threshold: float = 0.4
    threshold_on: str = "occlusion"        # "occlusion": remove when occ >= t; "visibility": remove when v < t

    # Pipeline
    retry_limit: int = 5
    exemplar_score_mode: str = "visibility_area"  # or "area"

    @property
    def scaled(self) -> "ScaledConfig":
        return ScaledConfig(self)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    def identity_hash(self) -> str:
        """Hash of every field that affects generated content (not where it
        goes or how fast it is produced)."""
        d = self.to_dict()
        for volatile in ("output_dir", "workers", "write_run_report"):
            d.pop(volatile)
        blob = json.dumps(d, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


class ScaledConfig:
    """World-unit view of the fractional geometry parameters."""

    def __init__(self, cfg: GeneratorConfig):
        s = cfg.scene_scale
        self.target_size_range = (cfg.target_size_range[0] * s, cfg.target_size_range[1] * s)
        self.spawn_margin = cfg.spawn_margin * s
        self.spawn_height_range = (cfg.spawn_height_range[0] * s, cfg.spawn_height_range[1] * s)
        self.spawn_xy_range = (cfg.spawn_xy_range[0] * s, cfg.spawn_xy_range[1] * s)
        self.container_extent_range = (cfg.container_extent_range[0] * s, cfg.container_extent_range[1] * s)
        self.container_wall_height_range = (
            cfg.container_wall_height_range[0] * s,
            cfg.container_wall_height_range[1] * s,
        )
        self.floor_extent_range = (cfg.floor_extent_range[0] * s, cfg.floor_extent_range[1] * s)
        self.floor_thickness_range = (cfg.floor_thickness_range[0] * s, cfg.floor_thickness_range[1] * s)
        self.distractor_base_scale = cfg.distractor_base_scale * s
        self.distractor_margin = cfg.distractor_margin * s


_FIELDS = {f.name: f for f in dataclasses.fields(GeneratorConfig)}


def _parse_scalar(token: str):
    token = token.strip()
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token.strip("\"'")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        raw = raw[1:-1]
    if "," in raw:
        return tuple(_parse_scalar(t) for t in raw.split(","))
    return _parse_scalar(raw)


def _coerce(key: str, value, line_no: int):
    want = _FIELDS[key].type
    is_tuple = isinstance(want, str) and want.startswith("tuple")
    if is_tuple:
        if not isinstance(value, tuple):
            value = (value,)
        elem = float if "float" in want else int
        try:
            coerced = tuple(elem(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"line {line_no}: key '{key}' expects a list of numbers")
        arity = want.count(",") + 1
        if len(coerced) != arity:
            raise ConfigError(f"line {line_no}: key '{key}' expects {arity} values, got {len(coerced)}")
        return coerced
    if want == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"line {line_no}: key '{key}' expects an integer")
        return value
    if want == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"line {line_no}: key '{key}' expects a number")
        return float(value)
    if want == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"line {line_no}: key '{key}' expects true or false")
        return value
    return str(value)


def _validate(cfg: GeneratorConfig) -> None:
    def check_range(name, rng, kind="numeric"):
        if rng[0] > rng[1]:
            raise ConfigError(f"invalid config: {name} low {rng[0]} exceeds high {rng[1]}")

    for name in (
        "count_range", "class_count_range", "target_size_range", "size_jitter_range",
        "resize_factor_range", "spawn_height_range", "spawn_xy_range",
        "container_extent_range", "container_axis_scale_range", "container_wall_height_range",
        "floor_extent_range", "floor_thickness_range", "uv_scale_range",
        "distractor_count_range", "distractor_scale_multiplier_range",
        "camera_elevation_range_deg", "camera_roll_range_deg",
        "light_count_range", "light_intensity_range", "ambient_range",
    ):
        check_range(name, getattr(cfg, name))

    if not (0.0 < cfg.visibility_occlusion_threshold < 1.0):
        raise ConfigError("invalid config: visibility_occlusion_threshold must lie in (0, 1)")
    if cfg.threshold_on not in ("occlusion", "visibility"):
        raise ConfigError("invalid config: threshold_on must be 'occlusion' or 'visibility'")
    if cfg.resolution < 64:
        raise ConfigError("invalid config: resolution must be >= 64")
    if cfg.scene_count < 0:
        raise ConfigError("invalid config: scene_count must be >= 0")
    if cfg.scene_scale <= 0:
        raise ConfigError("invalid config: scene_scale must be positive")
    if abs(sum(cfg.split_ratios) - 1.0) > 1e-9:
        raise ConfigError("invalid config: split_ratios must sum to 1")
    if any(r < 0 for r in cfg.split_ratios):
        raise ConfigError("invalid config: split_ratios must be non-negative")
    if cfg.count_range[0] < 1:
        raise ConfigError("invalid config: count_range low must be >= 1")
    if cfg.class_count_range[0] < 1:
        raise ConfigError("invalid config: class_count_range low must be >= 1")
    if cfg.catalog_size < cfg.class_count_range[1]:
        raise ConfigError("invalid config: catalog_size must cover class_count_range high")
    probs = (cfg.derive_resized_prob, cfg.derive_same_category_prob, cfg.derive_other_category_prob)
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise ConfigError("invalid config: derivation probabilities must be non-negative and sum to 1")
    if not (0.0 <= cfg.container_probability <= 1.0):
        raise ConfigError("invalid config: container_probability must lie in [0, 1]")
    if cfg.settle_max_steps < 1:
        raise ConfigError("invalid config: settle_max_steps must be >= 1")
    if cfg.settle_penetration_tolerance <= 0:
        raise ConfigError("invalid config: settle_penetration_tolerance must be positive")
    if cfg.exemplar_score_mode not in ("visibility_area", "area"):
        raise ConfigError("invalid config: exemplar_score_mode must be 'visibility_area' or 'area'")
    if not (0.0 < cfg.camera_fov_deg < 180.0):
        raise ConfigError("invalid config: camera_fov_deg must lie in (0, 180)")
    if cfg.retry_limit < 1:
        raise ConfigError("invalid config: retry_limit must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("invalid config: workers must be >= 1")


def load_config(path: str | Path) -> GeneratorConfig:
    """Load a config file, filling defaults for absent keys.

    Raises ConfigError with a line number on parse problems and with the
    offending key name on validation problems.
    """
    path = Path(path)
    overrides: dict = {}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
        if key in overrides:
            raise ConfigError(f"line {line_no}: duplicate key '{key}'")
        overrides[key] = _coerce(key, _parse_value(raw), line_no)
    cfg = GeneratorConfig(**overrides)
    _validate(cfg)
    return cfg


def config_from_dict(overrides: dict) -> GeneratorConfig:
    """Build a validated config from keyword overrides (test/tooling path)."""
    unknown = set(overrides) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    coerced = {k: _coerce(k, tuple(v) if isinstance(v, (list, tuple)) else v, 0) for k, v in overrides.items()}
    cfg = GeneratorConfig(**coerced)
    _validate(cfg)
    return cfg
