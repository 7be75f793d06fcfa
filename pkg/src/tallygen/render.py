"""Multi-pass scene rendering: RGB, instance IDs, depth, normals, and
per-instance unoccluded masks.

A scene is a list of entities (floor, optional container, object
instances).  Every pass derives from the same cached per-entity fragments:
the ID/depth/normal buffers are a depth-merge over a chosen subset of
entities, and an instance's unoccluded mask is simply its own fragment,
so the visibility filter can re-render after removals without casting a
single new ray.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraSpec, ray_directions
from .catalog import AssetCatalog, ObjectTemplate
from .composer import ContainerSpec, FloorSpec, InstanceState, ScenePlan
from .config import GeneratorConfig
from .materials import (LightRig, Material, material_from_albedo,
                        sample_container_material, sample_floor_material,
                        sample_light_rig)
from .meshes import dish, floor_slab, plate
from .raycast import (Entity, Fragment, HitBuffers, cast_entity,
                      entity_from_mesh, merge_fragments)
from .rng import RngStream
from .transforms import quat_to_matrix, rotated_extents

FLOOR_KEY = -1
CONTAINER_KEY = -2


@dataclass
class BitMask:
    grid: np.ndarray  # (H, W) bool

    @property
    def area(self) -> int:
        return int(self.grid.sum())


@dataclass
class RenderPasses:
    rgb: np.ndarray                     # (H, W, 3) uint8
    instance_ids: np.ndarray            # (H, W) int32, 0 = background/scenery
    depth: np.ndarray                   # (H, W) float64, inf where nothing hit
    normals: np.ndarray                 # (H, W, 3) float64, zeros where nothing hit
    per_instance_unoccluded: dict[int, BitMask]

    @property
    def resolution(self) -> int:
        return self.instance_ids.shape[0]


def container_mesh(spec: ContainerSpec):
    if spec.style == "dish":
        return dish(spec.inner_rx, spec.inner_ry, spec.wall_height,
                    spec.base_thickness, spec.wall_ratio)
    return plate(spec.inner_rx, spec.inner_ry, spec.wall_height, spec.base_thickness)


class SceneRenderer:
    """Holds the world-space entities and shading state of one scene."""

    def __init__(self, plan: ScenePlan, instances: list[InstanceState],
                 catalog: AssetCatalog, config: GeneratorConfig, style_stream: RngStream):
        self.config = config
        self.plan = plan
        self.instances = {i.instance_id: i for i in instances if i.alive}

        floor_mat = sample_floor_material(style_stream, config, plan.floor.uv_scale)
        container_mat = sample_container_material(style_stream)
        self.lights: LightRig = sample_light_rig(style_stream, config)

        self.entities: dict[int, Entity] = {}
        self.entities[FLOOR_KEY] = entity_from_mesh(
            floor_slab(plan.floor.shape, plan.floor.half_extent, plan.floor.thickness),
            FLOOR_KEY, floor_mat)
        if plan.container is not None:
            self.entities[CONTAINER_KEY] = entity_from_mesh(
                container_mesh(plan.container), CONTAINER_KEY, container_mat)

        self._template_materials: dict[str, Material] = {}
        for inst in instances:
            if not inst.alive:
                continue
            template = catalog.by_id[inst.template_id]
            mat = self._template_materials.get(template.template_id)
            if mat is None:
                mat = material_from_albedo(template.albedo)
                self._template_materials[template.template_id] = mat
            self.entities[inst.instance_id] = entity_from_mesh(
                template.mesh, inst.instance_id, mat,
                scale=inst.scale, quat=inst.quat, offset=inst.position)

    def instance_keys(self) -> list[int]:
        return sorted(k for k in self.entities if k > 0)

    def entity_order(self, keys=None) -> list[int]:
        if keys is None:
            keys = self.instance_keys()
        order = [FLOOR_KEY]
        if CONTAINER_KEY in self.entities:
            order.append(CONTAINER_KEY)
        order.extend(sorted(k for k in keys if k > 0))
        return order


class FrameCast:
    """Per-camera fragment cache over a scene."""

    def __init__(self, scene: SceneRenderer, camera: CameraSpec):
        self.scene = scene
        self.camera = camera
        self.dirs = ray_directions(camera)
        self._fragments: dict[int, Fragment | None] = {}

    def fragment(self, key: int) -> Fragment | None:
        if key not in self._fragments:
            self._fragments[key] = cast_entity(self.camera, self.dirs, self.scene.entities[key])
        return self._fragments[key]

    def buffers(self, keys=None) -> HitBuffers:
        frags = [f for k in self.scene.entity_order(keys)
                 if (f := self.fragment(k)) is not None]
        return merge_fragments(frags, self.camera.resolution)

    def unoccluded_mask(self, instance_id: int) -> BitMask:
        if instance_id not in self.scene.entities or instance_id <= 0:
            raise KeyError(f"unknown instance_id {instance_id}")
        frag = self.fragment(instance_id)
        n = self.camera.resolution
        if frag is None:
            return BitMask(np.zeros((n, n), dtype=bool))
        return BitMask(frag.full_mask(n))

    def occluded_areas(self, buffers: HitBuffers) -> dict[int, int]:
        keys = buffers.key[buffers.key > 0]
        if keys.size == 0:
            return {}
        counts = np.bincount(keys)
        return {int(k): int(counts[k]) for k in np.nonzero(counts)[0]}

    def shade(self, buffers: HitBuffers) -> tuple[np.ndarray, np.ndarray]:
        """RGB (float, [0,1]) and per-pixel unit normals for merged buffers."""
        n = self.camera.resolution
        normals = np.zeros((n, n, 3))
        albedo = np.zeros((n, n, 3))
        hit_any = buffers.key != HitBuffers.NO_HIT
        for key in self.scene.entity_order(list(self.scene.entities)):
            ent = self.scene.entities[key]
            mask = buffers.key == key
            if not mask.any():
                continue
            tri = buffers.tri[mask]
            u = buffers.u[mask][:, None]
            v = buffers.v[mask][:, None]
            w = 1.0 - u - v
            nrm = w * ent.n0[tri] + u * ent.n1[tri] + v * ent.n2[tri]
            nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-12)
            d = self.dirs[mask]
            facing_away = (nrm * d).sum(axis=1) > 0.0
            nrm[facing_away] *= -1.0
            normals[mask] = nrm
            uv = w * ent.uv0[tri] + u * ent.uv1[tri] + v * ent.uv2[tri]
            world = self.camera.origin + buffers.depth[mask][:, None] * d
            albedo[mask] = ent.material.albedo(uv, world)

        rgb = np.broadcast_to(self.scene.lights.background, (n, n, 3)).copy()
        if hit_any.any():
            rgb[hit_any] = self.scene.lights.shade(normals[hit_any], albedo[hit_any])
        return rgb, normals

    def passes(self, keys=None) -> RenderPasses:
        buffers = self.buffers(keys)
        rgb_f, normals = self.shade(buffers)
        if self.scene.config.supersample_rgb:
            rgb_f = self._supersampled_rgb(keys)
        ids = np.where(buffers.key > 0, buffers.key, 0).astype(np.int32)
        unoccluded = {k: self.unoccluded_mask(k)
                      for k in (keys if keys is not None else self.scene.instance_keys())}
        rgb8 = np.clip(np.rint(rgb_f * 255.0), 0, 255).astype(np.uint8)
        return RenderPasses(rgb8, ids, buffers.depth, normals, unoccluded)

    def _supersampled_rgb(self, keys) -> np.ndarray:
        cam2 = replace(self.camera, resolution=self.camera.resolution * 2)
        sub = FrameCast(self.scene, cam2)
        rgb2, _ = sub.shade(sub.buffers(keys))
        n = self.camera.resolution
        return rgb2.reshape(n, 2, n, 2, 3).mean(axis=(1, 3))


def render_passes(scene: SceneRenderer, camera: CameraSpec, resolution: int | None = None) -> RenderPasses:
    """One primary ray per pixel over all alive entities."""
    if resolution is not None and resolution != camera.resolution:
        camera = replace(camera, resolution=resolution)
    return FrameCast(scene, camera).passes()


def render_unoccluded_mask(scene: SceneRenderer, camera: CameraSpec, instance_id: int) -> BitMask:
    """Mask of pixels the instance covers when rendered alone."""
    return FrameCast(scene, camera).unoccluded_mask(instance_id)


def counted_framing(plan: ScenePlan, instances: list[InstanceState],
                    catalog: AssetCatalog) -> tuple[tuple[np.ndarray, np.ndarray], np.ndarray]:
    """Framing AABB (container if present, else joint AABB of alive counted
    instances) and the counted-objects centroid."""
    counted = [i for i in instances if i.alive and not i.is_distractor]
    if counted:
        centroid = np.mean([i.position for i in counted], axis=0)
    else:
        centroid = np.zeros(3)
    if plan.container is not None:
        return plan.container.aabb, centroid
    los, his = [], []
    for inst in counted:
        mesh = catalog.by_id[inst.template_id].mesh
        lo, hi = rotated_extents(mesh.vertices, quat_to_matrix(inst.quat), inst.scale)
        los.append(lo + inst.position)
        his.append(hi + inst.position)
    if not los:
        unit = np.array([1.0, 1.0, 1.0])
        return (centroid - unit, centroid + unit), centroid
    return (np.min(los, axis=0), np.max(his, axis=0)), centroid


# Fixed three-quarter view used for catalog exemplar renders.
_EXEMPLAR_ELEVATION = 35.0
_EXEMPLAR_AZIMUTH = 45.0
_EXEMPLAR_DISTANCE = 3.2
_EXEMPLAR_FOV = 40.0


def render_external_exemplar(template: ObjectTemplate, resolution: int) -> np.ndarray:
    """Canonical-pose render on a pure white background; returns (H, W, 3) uint8.

    Camera and lighting are fixed so the same template always produces a
    byte-identical image.
    """
    import math

    el = math.radians(_EXEMPLAR_ELEVATION)
    az = math.radians(_EXEMPLAR_AZIMUTH)
    origin = _EXEMPLAR_DISTANCE * np.array([
        math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    camera = CameraSpec(
        origin=origin, look_at=np.zeros(3), azimuth_deg=_EXEMPLAR_AZIMUTH,
        elevation_deg=_EXEMPLAR_ELEVATION, radius=_EXEMPLAR_DISTANCE,
        roll_deg=0.0, vertical_fov_deg=_EXEMPLAR_FOV, resolution=resolution,
    )
    entity = entity_from_mesh(template.mesh, 1, material_from_albedo(template.albedo))
    dirs = ray_directions(camera)
    frag = cast_entity(camera, dirs, entity)
    rgb = np.ones((resolution, resolution, 3))
    if frag is not None and frag.hit.any():
        buffers = merge_fragments([frag], resolution)
        key_dir = -origin / np.linalg.norm(origin)
        fill = np.array([0.0, 0.0, -1.0])
        lights = LightRig(
            directions=np.stack([key_dir, fill]),
            intensities=np.array([0.75, 0.25]),
            colors=np.ones((2, 3)),
            ambient=0.35,
            background=np.ones(3),
        )
        mask = buffers.key == 1
        tri = buffers.tri[mask]
        u = buffers.u[mask][:, None]
        v = buffers.v[mask][:, None]
        w = 1.0 - u - v
        nrm = w * entity.n0[tri] + u * entity.n1[tri] + v * entity.n2[tri]
        nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-12)
        d = dirs[mask]
        nrm[(nrm * d).sum(axis=1) > 0.0] *= -1.0
        uv = w * entity.uv0[tri] + u * entity.uv1[tri] + v * entity.uv2[tri]
        world = origin + buffers.depth[mask][:, None] * d
        albedo = entity.material.albedo(uv, world)
        rgb[mask] = lights.shade(nrm, albedo)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
