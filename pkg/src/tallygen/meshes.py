"""Procedural triangle-mesh primitives.

All builders return meshes with per-vertex normals and UVs so the ray
caster can shade any hit.  Canonical object templates are normalized so
the AABB is centered at the origin with max extent exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class TriMesh:
    vertices: np.ndarray   # (V, 3) float64
    faces: np.ndarray      # (F, 3) int32
    normals: np.ndarray    # (V, 3) float64, unit
    uvs: np.ndarray        # (V, 2) float64

    @property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def copy(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.faces.copy(), self.normals.copy(), self.uvs.copy())


def merge(meshes: list[TriMesh]) -> TriMesh:
    verts, faces, normals, uvs = [], [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        normals.append(m.normals)
        uvs.append(m.uvs)
        offset += len(m.vertices)
    return TriMesh(
        np.concatenate(verts), np.concatenate(faces).astype(np.int32),
        np.concatenate(normals), np.concatenate(uvs),
    )


def transformed(mesh: TriMesh, scale=1.0, offset=(0.0, 0.0, 0.0)) -> TriMesh:
    scale = np.asarray(scale, dtype=np.float64)
    if scale.ndim == 0:
        scale = np.full(3, float(scale))
    v = mesh.vertices * scale + np.asarray(offset, dtype=np.float64)
    # Normals transform with the inverse-transpose of a diagonal scale.
    n = mesh.normals / np.where(scale == 0, 1.0, scale)
    n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-12)
    return TriMesh(v, mesh.faces.copy(), n, mesh.uvs.copy())


def normalize_canonical(mesh: TriMesh) -> TriMesh:
    """Center the AABB at the origin and scale max extent to exactly 1."""
    lo, hi = mesh.aabb
    center = (lo + hi) / 2.0
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ValueError("degenerate mesh")
    v = (mesh.vertices - center) / extent
    return TriMesh(v, mesh.faces.copy(), mesh.normals.copy(), mesh.uvs.copy())


def _grid_faces(rows: int, cols: int, wrap_cols: bool) -> np.ndarray:
    """Quads over a (rows+1) x (cols or cols+1) vertex grid, split to tris."""
    ncol = cols if wrap_cols else cols + 1
    faces = []
    for r in range(rows):
        for c in range(cols):
            c2 = (c + 1) % cols if wrap_cols else c + 1
            a = r * ncol + c
            b = r * ncol + c2
            d = (r + 1) * ncol + c
            e = (r + 1) * ncol + c2
            faces.append((a, b, e))
            faces.append((a, e, d))
    return np.asarray(faces, dtype=np.int32)


def uv_sphere(slices: int = 20, stacks: int = 12, squash: float = 1.0) -> TriMesh:
    """Sphere of diameter 1 (optionally squashed along z)."""
    verts, normals, uvs = [], [], []
    for i in range(stacks + 1):
        theta = math.pi * i / stacks
        for j in range(slices):
            phi = 2.0 * math.pi * j / slices
            n = (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))
            verts.append((0.5 * n[0], 0.5 * n[1], 0.5 * n[2] * squash))
            normals.append(n)
            uvs.append((j / slices, i / stacks))
    faces = _grid_faces(stacks, slices, wrap_cols=True)
    mesh = TriMesh(np.asarray(verts), faces, np.asarray(normals), np.asarray(uvs))
    if squash != 1.0:
        mesh.normals = mesh.normals / np.array([1.0, 1.0, squash])
        mesh.normals /= np.linalg.norm(mesh.normals, axis=1, keepdims=True)
    return mesh


def box(wx: float = 1.0, wy: float = 1.0, wz: float = 1.0) -> TriMesh:
    """Axis-aligned box with sharp per-face normals."""
    hx, hy, hz = wx / 2, wy / 2, wz / 2
    # (normal axis, sign)
    specs = [(0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)]
    verts, normals, uvs, faces = [], [], [], []
    for axis, sign in specs:
        u_axis, v_axis = [(1, 2), (2, 0), (0, 1)][axis]
        base = len(verts)
        for du, dv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            p = [0.0, 0.0, 0.0]
            p[axis] = sign * (hx, hy, hz)[axis]
            p[u_axis] = du * (hx, hy, hz)[u_axis]
            p[v_axis] = dv * (hx, hy, hz)[v_axis]
            verts.append(tuple(p))
            n = [0.0, 0.0, 0.0]
            n[axis] = float(sign)
            normals.append(tuple(n))
            uvs.append(((du + 1) / 2, (dv + 1) / 2))
        if sign > 0:
            faces += [(base, base + 1, base + 2), (base, base + 2, base + 3)]
        else:
            faces += [(base, base + 2, base + 1), (base, base + 3, base + 2)]
    return TriMesh(np.asarray(verts), np.asarray(faces, np.int32), np.asarray(normals), np.asarray(uvs))


def lathe(profile: list[tuple[float, float]], segments: int = 24,
          scale_x: float = 1.0, scale_y: float = 1.0) -> TriMesh:
    """Revolve an (r, z) profile polyline around +z (elliptical if scaled).

    Profile runs bottom to top; points with r == 0 become poles.  Normals
    come from the 2D profile tangents, which keeps silhouettes smooth.
    """
    pts = np.asarray(profile, dtype=np.float64)
    # Per-point outward normal of the profile in the (r, z) plane.
    seg = pts[1:] - pts[:-1]
    seg_n = np.stack([seg[:, 1], -seg[:, 0]], axis=1)
    seg_n /= np.maximum(np.linalg.norm(seg_n, axis=1, keepdims=True), 1e-12)
    pn = np.zeros_like(pts)
    pn[:-1] += seg_n
    pn[1:] += seg_n
    pn /= np.maximum(np.linalg.norm(pn, axis=1, keepdims=True), 1e-12)

    rows = len(pts)
    verts, normals, uvs = [], [], []
    vmax = max(pts[:, 1].max() - pts[:, 1].min(), 1e-9)
    for i, (r, z) in enumerate(pts):
        for j in range(segments):
            phi = 2.0 * math.pi * j / segments
            c, s = math.cos(phi), math.sin(phi)
            verts.append((r * c * scale_x, r * s * scale_y, z))
            nr, nz = pn[i]
            n = np.array([nr * c / max(scale_x, 1e-9), nr * s / max(scale_y, 1e-9), nz])
            n /= max(np.linalg.norm(n), 1e-12)
            normals.append(tuple(n))
            uvs.append((j / segments, (z - pts[:, 1].min()) / vmax))
    faces = _grid_faces(rows - 1, segments, wrap_cols=True)
    # Drop degenerate triangles at poles (r == 0 rings collapse).
    v = np.asarray(verts)
    f = faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    area2 = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    f = f[area2 > 1e-12]
    return TriMesh(v, f.astype(np.int32), np.asarray(normals), np.asarray(uvs))


def cylinder(radius: float = 0.5, height: float = 1.0, segments: int = 24) -> TriMesh:
    h = height / 2
    profile = [(0.0, -h), (radius, -h), (radius, h), (0.0, h)]
    return lathe(profile, segments)


def cone(radius: float = 0.5, height: float = 1.0, segments: int = 24) -> TriMesh:
    h = height / 2
    profile = [(0.0, -h), (radius, -h), (0.0, h)]
    return lathe(profile, segments)


def capsule(radius: float = 0.3, cyl_height: float = 0.6, segments: int = 20, cap_rings: int = 5) -> TriMesh:
    h = cyl_height / 2
    profile = [(0.0, -h - radius)]
    for i in range(1, cap_rings + 1):
        a = math.pi / 2 * i / cap_rings
        profile.append((radius * math.sin(a), -h - radius * math.cos(a)))
    for i in range(1, cap_rings + 1):
        a = math.pi / 2 * i / cap_rings
        profile.append((radius * math.cos(a), h + radius * math.sin(a)))
    return lathe(profile, segments)


def torus(major: float = 0.35, minor: float = 0.15, seg_major: int = 22, seg_minor: int = 10) -> TriMesh:
    verts, normals, uvs = [], [], []
    for i in range(seg_major + 1):
        u = 2.0 * math.pi * (i % seg_major) / seg_major
        cu, su = math.cos(u), math.sin(u)
        for j in range(seg_minor):
            v = 2.0 * math.pi * j / seg_minor
            cv, sv = math.cos(v), math.sin(v)
            verts.append(((major + minor * cv) * cu, (major + minor * cv) * su, minor * sv))
            normals.append((cv * cu, cv * su, sv))
            uvs.append((i / seg_major, j / seg_minor))
    faces = _grid_faces(seg_major, seg_minor, wrap_cols=True)
    return TriMesh(np.asarray(verts), faces, np.asarray(normals), np.asarray(uvs))


def bottle(body_radius: float = 0.32, body_height: float = 0.62, neck_radius: float = 0.12,
           neck_height: float = 0.25, segments: int = 20) -> TriMesh:
    shoulder = body_height * 0.12
    z0 = 0.0
    profile = [
        (0.0, z0),
        (body_radius, z0),
        (body_radius, z0 + body_height),
        (neck_radius, z0 + body_height + shoulder),
        (neck_radius, z0 + body_height + shoulder + neck_height),
        (0.0, z0 + body_height + shoulder + neck_height),
    ]
    return lathe(profile, segments)


def dish(inner_rx: float, inner_ry: float, wall_height: float, base_thickness: float,
         wall_thickness: float, segments: int = 28) -> TriMesh:
    """Open elliptical tray: flat interior base with a vertical rim."""
    r_in = 1.0
    r_out = 1.0 + wall_thickness
    profile = [
        (0.0, 0.0),
        (r_out, 0.0),
        (r_out, base_thickness + wall_height),
        (r_in, base_thickness + wall_height),
        (r_in, base_thickness),
        (0.0, base_thickness),
    ]
    return lathe(profile, segments, scale_x=inner_rx, scale_y=inner_ry)


def plate(inner_rx: float, inner_ry: float, rim_height: float, base_thickness: float,
          segments: int = 28) -> TriMesh:
    """Shallow elliptical plate with a sloped rim."""
    profile = [
        (0.0, 0.0),
        (1.18, 0.0),
        (1.18, base_thickness + rim_height),
        (1.0, base_thickness + rim_height * 0.55),
        (1.0, base_thickness),
        (0.0, base_thickness),
    ]
    return lathe(profile, segments, scale_x=inner_rx, scale_y=inner_ry)


def floor_slab(shape: str, half_extent: float, thickness: float) -> TriMesh:
    """Floor with its top face at z = 0."""
    if shape == "cube":
        m = box(2 * half_extent, 2 * half_extent, thickness)
        return transformed(m, offset=(0.0, 0.0, -thickness / 2))
    if shape == "cylinder":
        m = cylinder(radius=half_extent, height=thickness, segments=48)
        return transformed(m, offset=(0.0, 0.0, -thickness / 2))
    raise ValueError(f"unknown floor shape {shape!r}")
