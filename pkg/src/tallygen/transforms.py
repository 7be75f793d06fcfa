"""Small rigid-transform helpers shared by composition, settling and rendering."""

from __future__ import annotations

import numpy as np


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix from a (w, x, y, z) unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ], dtype=np.float64)


def transform_points(points: np.ndarray, rot: np.ndarray, scale: float, offset) -> np.ndarray:
    return (points * scale) @ rot.T + np.asarray(offset, dtype=np.float64)


def rotated_extents(vertices: np.ndarray, rot: np.ndarray, scale: float):
    """(lo, hi) AABB of scaled+rotated vertices around the origin."""
    v = (vertices * scale) @ rot.T
    return v.min(axis=0), v.max(axis=0)
