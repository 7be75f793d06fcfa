"""Ray casting core: a compiled nearest-hit kernel plus per-entity fragments.

The acceleration scheme is two-level: each entity (floor, container, every
object instance) is culled to the screen rectangle of its world AABB, and
only the rays inside that rectangle are tested against its triangles.
Fragments cache the per-entity hit results, so re-merging after an object
is removed costs no new intersection work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .camera import CameraSpec, screen_rect
from .meshes import TriMesh
from .transforms import quat_to_matrix, transform_points


@njit(cache=True)
def _cast_kernel(ox, oy, oz, dirs, v0, e1, e2, tmin, hit_tri, hit_u, hit_v):
    """Nearest-hit Moller-Trumbore over all (ray, triangle) pairs."""
    n_rays = dirs.shape[0]
    n_tris = v0.shape[0]
    for r in range(n_rays):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        best = tmin[r]
        best_k = hit_tri[r]
        best_u = hit_u[r]
        best_v = hit_v[r]
        for k in range(n_tris):
            e1x = e1[k, 0]; e1y = e1[k, 1]; e1z = e1[k, 2]
            e2x = e2[k, 0]; e2y = e2[k, 1]; e2z = e2[k, 2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if -1e-12 < det < 1e-12:
                continue
            inv = 1.0 / det
            tvx = ox - v0[k, 0]; tvy = oy - v0[k, 1]; tvz = oz - v0[k, 2]
            u = (tvx * px + tvy * py + tvz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = tvy * e1z - tvz * e1y
            qy = tvz * e1x - tvx * e1z
            qz = tvx * e1y - tvy * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if 1e-6 < t < best:
                best = t
                best_k = k
                best_u = u
                best_v = v
        tmin[r] = best
        hit_tri[r] = best_k
        hit_u[r] = best_u
        hit_v[r] = best_v


@dataclass
class Entity:
    """World-space triangle soup with per-corner shading attributes."""
    key: int                    # instance_id for objects; negative for scenery
    v0: np.ndarray              # (T, 3)
    e1: np.ndarray
    e2: np.ndarray
    n0: np.ndarray              # per-corner vertex normals
    n1: np.ndarray
    n2: np.ndarray
    uv0: np.ndarray             # (T, 2)
    uv1: np.ndarray
    uv2: np.ndarray
    aabb_lo: np.ndarray
    aabb_hi: np.ndarray
    material: object            # materials.Material

    @property
    def triangle_count(self) -> int:
        return len(self.v0)


def entity_from_mesh(mesh: TriMesh, key: int, material,
                     scale: float = 1.0, quat=None, offset=(0.0, 0.0, 0.0)) -> Entity:
    rot = quat_to_matrix(quat) if quat is not None else np.eye(3)
    verts = transform_points(mesh.vertices, rot, scale, offset)
    norms = mesh.normals @ rot.T
    f = mesh.faces
    tv = verts[f]                                  # (T, 3, 3)
    tn = norms[f]
    tuv = mesh.uvs[f]
    v0 = np.ascontiguousarray(tv[:, 0])
    return Entity(
        key=key,
        v0=v0,
        e1=np.ascontiguousarray(tv[:, 1] - tv[:, 0]),
        e2=np.ascontiguousarray(tv[:, 2] - tv[:, 0]),
        n0=np.ascontiguousarray(tn[:, 0]),
        n1=np.ascontiguousarray(tn[:, 1]),
        n2=np.ascontiguousarray(tn[:, 2]),
        uv0=np.ascontiguousarray(tuv[:, 0]),
        uv1=np.ascontiguousarray(tuv[:, 1]),
        uv2=np.ascontiguousarray(tuv[:, 2]),
        aabb_lo=verts.min(axis=0),
        aabb_hi=verts.max(axis=0),
        material=material,
    )


@dataclass
class Fragment:
    """Cached nearest-hit result of one entity over its screen rectangle."""
    key: int
    rect: tuple[int, int, int, int]      # (r0, r1, c0, c1), end-exclusive
    t: np.ndarray                        # (h, w) float64, inf where missed
    tri: np.ndarray                      # (h, w) int32, -1 where missed
    u: np.ndarray
    v: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return self.tri >= 0

    def full_mask(self, resolution: int) -> np.ndarray:
        mask = np.zeros((resolution, resolution), dtype=bool)
        r0, r1, c0, c1 = self.rect
        mask[r0:r1, c0:c1] = self.hit
        return mask


def cast_entity(camera: CameraSpec, dirs: np.ndarray, entity: Entity) -> Fragment | None:
    """Intersect the pixel rays inside the entity's screen rect; None when
    the entity cannot appear in frame."""
    rect = screen_rect(camera, entity.aabb_lo, entity.aabb_hi)
    if rect is None:
        return None
    r0, r1, c0, c1 = rect
    sub = np.ascontiguousarray(dirs[r0:r1, c0:c1].reshape(-1, 3))
    n = len(sub)
    tmin = np.full(n, np.inf)
    tri = np.full(n, -1, dtype=np.int32)
    uu = np.zeros(n)
    vv = np.zeros(n)
    ox, oy, oz = (float(x) for x in camera.origin)
    _cast_kernel(ox, oy, oz, sub, entity.v0, entity.e1, entity.e2, tmin, tri, uu, vv)
    shape = (r1 - r0, c1 - c0)
    return Fragment(entity.key, rect, tmin.reshape(shape), tri.reshape(shape),
                    uu.reshape(shape), vv.reshape(shape))


@dataclass
class HitBuffers:
    depth: np.ndarray       # (H, W) float64, inf where nothing hit
    key: np.ndarray         # (H, W) int32, sentinel -2**31 where nothing hit
    tri: np.ndarray         # (H, W) int32
    u: np.ndarray
    v: np.ndarray

    NO_HIT = np.int32(-(2 ** 31))


def merge_fragments(fragments: list[Fragment], resolution: int) -> HitBuffers:
    """Depth-merge fragments; nearer hit wins, list order breaks exact ties."""
    depth = np.full((resolution, resolution), np.inf)
    key = np.full((resolution, resolution), HitBuffers.NO_HIT, dtype=np.int32)
    tri = np.full((resolution, resolution), -1, dtype=np.int32)
    u = np.zeros((resolution, resolution))
    v = np.zeros((resolution, resolution))
    for frag in fragments:
        r0, r1, c0, c1 = frag.rect
        win = frag.t < depth[r0:r1, c0:c1]
        if not win.any():
            continue
        depth[r0:r1, c0:c1][win] = frag.t[win]
        key[r0:r1, c0:c1][win] = frag.key
        tri[r0:r1, c0:c1][win] = frag.tri[win]
        u[r0:r1, c0:c1][win] = frag.u[win]
        v[r0:r1, c0:c1][win] = frag.v[win]
    return HitBuffers(depth, key, tri, u, v)
