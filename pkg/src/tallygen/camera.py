"""Camera sampling and the pinhole projection model.

The camera sits on a hemisphere around a look-at point: elevation, roll
and radius jitter are drawn from configured ranges, and the base distance
comes from the diagonal of the framing AABB (container when present,
otherwise the joint AABB of the counted objects).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import GeneratorConfig
from .rng import RngStream


@dataclass
class CameraSpec:
    origin: np.ndarray        # (3,)
    look_at: np.ndarray       # (3,)
    azimuth_deg: float
    elevation_deg: float
    radius: float
    roll_deg: float
    vertical_fov_deg: float
    resolution: int

    # Derived orthonormal frame (forward, right, up), roll applied.
    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        fwd = self.look_at - self.origin
        fwd = fwd / np.linalg.norm(fwd)
        world_up = np.array([0.0, 0.0, 1.0])
        if abs(float(fwd @ world_up)) > 0.999:
            world_up = np.array([0.0, 1.0, 0.0])
        right = np.cross(fwd, world_up)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        rho = math.radians(self.roll_deg)
        right_r = math.cos(rho) * right + math.sin(rho) * up
        up_r = -math.sin(rho) * right + math.cos(rho) * up
        return fwd, right_r, up_r

    def to_dict(self) -> dict:
        return {
            "origin": [float(v) for v in self.origin],
            "look_at": [float(v) for v in self.look_at],
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
            "radius": self.radius,
            "roll_deg": self.roll_deg,
            "vertical_fov_deg": self.vertical_fov_deg,
            "resolution": self.resolution,
        }


def sample_camera(framing_aabb: tuple[np.ndarray, np.ndarray], counted_centroid: np.ndarray,
                  stream: RngStream, config: GeneratorConfig) -> CameraSpec:
    """Sample the scene camera.

    framing_aabb: (lo, hi) of the container when present, else of the
    settled counted objects.  The look-at point is the counted centroid,
    jittered by a fraction of the framing diagonal.
    """
    lo, hi = framing_aabb
    diag = float(np.linalg.norm(hi - lo))
    base_distance = config.camera_distance_factor * diag
    rho = stream.uniform(-config.camera_radius_jitter, config.camera_radius_jitter)
    radius = base_distance * (1.0 + rho)

    elevation = stream.uniform(*config.camera_elevation_range_deg)
    azimuth = stream.uniform(0.0, 360.0)
    roll = stream.uniform(*config.camera_roll_range_deg)

    jit = config.camera_lookat_jitter * diag
    offset = np.array([stream.uniform(-jit, jit) for _ in range(3)]) if jit > 0 else np.zeros(3)
    look_at = np.asarray(counted_centroid, dtype=np.float64) + offset

    el = math.radians(elevation)
    az = math.radians(azimuth)
    origin = look_at + radius * np.array([
        math.cos(el) * math.cos(az),
        math.cos(el) * math.sin(az),
        math.sin(el),
    ])
    return CameraSpec(
        origin=origin, look_at=look_at, azimuth_deg=azimuth, elevation_deg=elevation,
        radius=radius, roll_deg=roll, vertical_fov_deg=config.camera_fov_deg,
        resolution=config.resolution,
    )


def ray_directions(camera: CameraSpec) -> np.ndarray:
    """Unit ray direction per pixel, shape (H, W, 3); row 0 is the top."""
    n = camera.resolution
    fwd, right, up = camera.frame()
    tan_half = math.tan(math.radians(camera.vertical_fov_deg) / 2.0)
    px = (np.arange(n) + 0.5) / n * 2.0 - 1.0       # left -> right
    py = 1.0 - (np.arange(n) + 0.5) / n * 2.0       # top -> bottom
    dirs = (fwd[None, None, :]
            + px[None, :, None] * tan_half * right[None, None, :]
            + py[:, None, None] * tan_half * up[None, None, :])
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs


def project_point(camera: CameraSpec, point) -> tuple[float, float] | None:
    """Project a world point to float pixel coordinates (col, row).

    Returns None when the point is behind the camera or outside the frame.
    """
    fwd, right, up = camera.frame()
    rel = np.asarray(point, dtype=np.float64) - camera.origin
    z = float(rel @ fwd)
    if z <= 1e-9:
        return None
    tan_half = math.tan(math.radians(camera.vertical_fov_deg) / 2.0)
    x = float(rel @ right) / (z * tan_half)
    y = float(rel @ up) / (z * tan_half)
    n = camera.resolution
    col = (x + 1.0) / 2.0 * n - 0.5
    row = (1.0 - y) / 2.0 * n - 0.5
    if col < -0.5 or col > n - 0.5 or row < -0.5 or row > n - 0.5:
        return None
    return (col, row)


def project_origin(camera: CameraSpec, point) -> tuple[float, float] | None:
    """Alias used by the visibility filter: in-frame pixel of an object origin."""
    return project_point(camera, point)


def screen_rect(camera: CameraSpec, aabb_lo, aabb_hi, pad: int = 2) -> tuple[int, int, int, int] | None:
    """Conservative pixel rectangle (r0, r1, c0, c1), end-exclusive, that
    contains the projection of the AABB.

    Falls back to the full frame when any corner reaches behind the camera
    (perspective projection of the box is no longer a convex polygon in
    the image then).  Returns None when the box is entirely behind the
    camera or projects outside the frame.
    """
    n = camera.resolution
    fwd, right, up = camera.frame()
    lo = np.asarray(aabb_lo, dtype=np.float64)
    hi = np.asarray(aabb_hi, dtype=np.float64)
    corners = np.array([[lo[0] if i & 1 else hi[0],
                         lo[1] if i & 2 else hi[1],
                         lo[2] if i & 4 else hi[2]] for i in range(8)])
    rel = corners - camera.origin
    z = rel @ fwd
    if np.all(z <= 1e-6):
        return None
    if np.any(z <= 1e-6):
        return (0, n, 0, n)
    tan_half = math.tan(math.radians(camera.vertical_fov_deg) / 2.0)
    x = (rel @ right) / (z * tan_half)
    y = (rel @ up) / (z * tan_half)
    cols = (x + 1.0) / 2.0 * n - 0.5
    rows = (1.0 - y) / 2.0 * n - 0.5
    c0 = max(0, int(math.floor(cols.min())) - pad)
    c1 = min(n, int(math.ceil(cols.max())) + pad + 1)
    r0 = max(0, int(math.floor(rows.min())) - pad)
    r1 = min(n, int(math.ceil(rows.max())) + pad + 1)
    if c0 >= c1 or r0 >= r1:
        return None
    return (r0, r1, c0, c1)
