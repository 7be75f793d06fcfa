"""Procedural albedo patterns and the direct-lighting model.

Floors favor repetitive tilings (checker, stripes, dot grids, value
noise); objects carry solid, striped, checkered or dotted albedos in UV
space.  Shading is Lambertian from one to three directional lights plus a
constant ambient term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import COLORS, AlbedoParams
from .config import GeneratorConfig
from .rng import RngStream


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice hash -> [0, 1)."""
    h = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
         ^ np.uint64(seed * 0x165667B1 + 0x27D4EB2F))
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _value_noise(x: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """Two-octave bilinear value noise in [0, 1]."""
    total = np.zeros_like(x)
    amp = 0.65
    for octave in range(2):
        fx, fy = x * (2 ** octave), y * (2 ** octave)
        ix, iy = np.floor(fx), np.floor(fy)
        tx, ty = fx - ix, fy - iy
        tx = tx * tx * (3 - 2 * tx)
        ty = ty * ty * (3 - 2 * ty)
        ix = ix.astype(np.int64)
        iy = iy.astype(np.int64)
        v00 = _hash01(ix, iy, seed + octave)
        v10 = _hash01(ix + 1, iy, seed + octave)
        v01 = _hash01(ix, iy + 1, seed + octave)
        v11 = _hash01(ix + 1, iy + 1, seed + octave)
        total += amp * ((v00 * (1 - tx) + v10 * tx) * (1 - ty)
                        + (v01 * (1 - tx) + v11 * tx) * ty)
        amp *= 0.35
    return np.clip(total, 0.0, 1.0)


@dataclass
class Material:
    pattern: str                       # solid | striped | checkered | dotted | noise
    color_a: np.ndarray                # (3,) linear RGB
    color_b: np.ndarray
    cell: float                        # pattern period (UV units or world units)
    world_xy: bool = False             # evaluate pattern on world XY (floors)
    noise_seed: int = 0
    glossy: bool = False

    def albedo(self, uv: np.ndarray, world: np.ndarray | None = None) -> np.ndarray:
        """Per-sample albedo; uv is (N, 2), world (N, 3) for floor materials."""
        if self.world_xy:
            coords = world[:, :2] / self.cell
        else:
            coords = uv / self.cell
        x, y = coords[:, 0], coords[:, 1]
        if self.pattern == "solid":
            return np.broadcast_to(self.color_a, (len(x), 3)).copy()
        if self.pattern == "striped":
            m = (np.floor(x) % 2 == 0)
        elif self.pattern == "checkered":
            m = ((np.floor(x) + np.floor(y)) % 2 == 0)
        elif self.pattern == "dotted":
            fx, fy = x - np.floor(x) - 0.5, y - np.floor(y) - 0.5
            m = (fx * fx + fy * fy) > 0.09
        elif self.pattern == "noise":
            w = _value_noise(x, y, self.noise_seed)[:, None]
            return self.color_a * (1 - w) + self.color_b * w
        else:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        return np.where(m[:, None], self.color_a, self.color_b)


def material_from_albedo(params: AlbedoParams) -> Material:
    return Material(
        pattern=params.pattern,
        color_a=np.asarray(params.color, dtype=np.float64),
        color_b=np.asarray(params.color2, dtype=np.float64),
        cell=params.pattern_scale,
        glossy=(params.finish == "glossy"),
    )


@dataclass
class LightRig:
    directions: np.ndarray      # (L, 3) unit vectors pointing from the light
    intensities: np.ndarray     # (L,)
    colors: np.ndarray          # (L, 3)
    ambient: float
    background: np.ndarray      # (3,)

    def shade(self, normals: np.ndarray, albedo: np.ndarray) -> np.ndarray:
        """Lambertian shading; normals (N, 3), albedo (N, 3) -> RGB in [0, 1]."""
        light = np.full(normals.shape, self.ambient)
        for d, inten, col in zip(self.directions, self.intensities, self.colors):
            lam = np.maximum(0.0, -(normals @ d))
            light += lam[:, None] * inten * col
        return np.clip(albedo * light, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "directions": self.directions.tolist(),
            "intensities": self.intensities.tolist(),
            "colors": self.colors.tolist(),
            "ambient": self.ambient,
            "background": self.background.tolist(),
        }


def sample_light_rig(stream: RngStream, config: GeneratorConfig) -> LightRig:
    count = stream.randint(*config.light_count_range)
    dirs, intens, cols = [], [], []
    for _ in range(count):
        az = stream.uniform(0.0, 2 * np.pi)
        el = stream.uniform(np.radians(25.0), np.radians(85.0))
        # Downward-pointing directional light.
        dirs.append([-np.cos(el) * np.cos(az), -np.cos(el) * np.sin(az), -np.sin(el)])
        intens.append(stream.uniform(*config.light_intensity_range))
        tint = np.array([stream.uniform(-0.08, 0.08) for _ in range(3)])
        cols.append(np.clip(1.0 + tint, 0.0, None))
    ambient = stream.uniform(*config.ambient_range)
    bg_value = stream.uniform(0.05, 0.9)
    bg_tint = np.array([stream.uniform(-0.06, 0.06) for _ in range(3)])
    background = np.clip(bg_value + bg_tint, 0.0, 1.0)
    return LightRig(
        directions=np.asarray(dirs), intensities=np.asarray(intens),
        colors=np.asarray(cols), ambient=ambient, background=background,
    )


FLOOR_PATTERNS = ("checkered", "striped", "dotted", "noise")
_FLOOR_WEIGHTS = (0.3, 0.25, 0.25, 0.2)


def sample_floor_material(stream: RngStream, config: GeneratorConfig, uv_scale: float) -> Material:
    """Floor albedo; the pattern cell is `uv_scale * scene_scale` world units,
    biased toward repetitive tilings."""
    u = stream.random()
    acc = 0.0
    pattern = FLOOR_PATTERNS[-1]
    for p, w in zip(FLOOR_PATTERNS, _FLOOR_WEIGHTS):
        acc += w
        if u < acc:
            pattern = p
            break
    names = list(COLORS)
    name_a = stream.choice(names)
    name_b = stream.choice(names)
    if name_b == name_a:
        name_b = "white" if name_a != "white" else "black"
    return Material(
        pattern=pattern,
        color_a=np.asarray(COLORS[name_a]),
        color_b=np.asarray(COLORS[name_b]),
        cell=uv_scale * config.scene_scale,
        world_xy=True,
        noise_seed=stream.randint(0, 2 ** 31 - 1),
    )


def sample_container_material(stream: RngStream) -> Material:
    names = list(COLORS)
    name = stream.choice(names)
    base = np.asarray(COLORS[name])
    return Material(pattern="solid", color_a=base, color_b=base * 0.8, cell=1.0)
