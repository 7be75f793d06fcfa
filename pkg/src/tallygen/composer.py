"""Scene planning: floor, container, counted classes, spawns, distractors.

All sampling follows the configured ranges; a plan is a pure function of
(catalog, config, stream) so scene plans for different indices can be
built concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import AssetCatalog, DescriptionTriple, ObjectTemplate
from .config import GeneratorConfig
from .rng import RngStream
from .transforms import quat_to_matrix, rotated_extents


class InsufficientCatalogError(RuntimeError):
    """The requested split has too few templates for the sampled plan."""


@dataclass
class FloorSpec:
    shape: str              # "cube" | "cylinder"
    half_extent: float      # world units
    thickness: float
    uv_scale: float         # raw texture scale in [0.04, 0.1]

    def to_dict(self) -> dict:
        return {"shape": self.shape, "half_extent": self.half_extent,
                "thickness": self.thickness, "uv_scale": self.uv_scale}


@dataclass
class ContainerSpec:
    style: str              # "dish" | "plate"
    inner_rx: float         # interior semi-axes, world units
    inner_ry: float
    wall_height: float
    base_thickness: float
    wall_ratio: float       # outer = inner * (1 + wall_ratio)

    @property
    def outer_rx(self) -> float:
        return self.inner_rx * (1.0 + self.wall_ratio)

    @property
    def outer_ry(self) -> float:
        return self.inner_ry * (1.0 + self.wall_ratio)

    @property
    def top_z(self) -> float:
        return self.base_thickness + self.wall_height

    @property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([-self.outer_rx, -self.outer_ry, 0.0])
        hi = np.array([self.outer_rx, self.outer_ry, self.top_z])
        return lo, hi

    def to_dict(self) -> dict:
        return {"style": self.style, "inner_rx": self.inner_rx, "inner_ry": self.inner_ry,
                "wall_height": self.wall_height, "base_thickness": self.base_thickness,
                "wall_ratio": self.wall_ratio}


@dataclass
class ObjectClassSpec:
    class_id: int
    template_id: str
    category: str
    d_max: float                      # target max AABB extent, world units
    derivation: str                   # base | resized | same-category | other-category
    size_tag: str                     # base | larger | smaller
    descriptions: DescriptionTriple
    resize_factor: float = 1.0

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id, "template_id": self.template_id,
            "category": self.category, "d_max": self.d_max,
            "derivation": self.derivation, "size_tag": self.size_tag,
            "resize_factor": self.resize_factor,
            "short": self.descriptions.short,
            "concise": self.descriptions.concise,
            "detailed": self.descriptions.detailed,
        }


@dataclass
class InstanceState:
    instance_id: int                  # 1-based; 0 is background in ID maps
    class_id: int                     # index into plan.classes; -1 for distractors
    template_id: str
    position: np.ndarray
    quat: tuple[float, float, float, float]
    scale: float                      # world scale applied to the unit template mesh
    scale_jitter: float               # gamma (1.0 for distractors)
    alive: bool = True
    is_distractor: bool = False

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id, "class_id": self.class_id,
            "template_id": self.template_id,
            "position": [float(v) for v in self.position],
            "quat": [float(v) for v in self.quat],
            "scale": self.scale, "scale_jitter": self.scale_jitter,
            "alive": self.alive, "is_distractor": self.is_distractor,
        }


@dataclass
class ScenePlan:
    scene_index: int
    split: str
    floor: FloorSpec
    container: ContainerSpec | None
    classes: list[ObjectClassSpec]
    target_count: int
    distractor_count: int
    notes: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)


def _prefixed(triple: DescriptionTriple, prefix: str) -> DescriptionTriple:
    return DescriptionTriple(
        f"{prefix} {triple.short}",
        f"{prefix} {triple.concise[0].lower()}{triple.concise[1:]}",
        f"{prefix} {triple.detailed[0].lower()}{triple.detailed[1:]}",
    )


def class_descriptions(catalog: AssetCatalog, template_id: str, size_tag: str) -> DescriptionTriple:
    base = catalog.descriptions[template_id]
    if size_tag == "larger":
        return _prefixed(base, "Larger")
    if size_tag == "smaller":
        return _prefixed(base, "Smaller")
    return base


def _sample_resized(base: ObjectClassSpec, stream: RngStream, config: GeneratorConfig) -> tuple[float, str, float]:
    """Pick a size factor for a resized variant, honoring the target-size
    bounds; returns (d_max, size_tag, factor)."""
    lo = config.target_size_range[0] * config.scene_scale
    hi = config.target_size_range[1] * config.scene_scale
    f_lo, f_hi = config.resize_factor_range
    head_larger = hi / base.d_max
    head_smaller = base.d_max / lo
    options = []
    if head_larger >= f_lo:
        options.append("larger")
    if head_smaller >= f_lo:
        options.append("smaller")
    direction = options[0] if len(options) == 1 else stream.choice(options)
    head = head_larger if direction == "larger" else head_smaller
    f = stream.uniform(f_lo, min(f_hi, head))
    d_new = base.d_max * f if direction == "larger" else base.d_max / f
    return d_new, direction, f


def build_class_variants(base: ObjectClassSpec, catalog: AssetCatalog, stream: RngStream,
                         config: GeneratorConfig, existing: list[ObjectClassSpec],
                         class_id: int) -> ObjectClassSpec:
    """Derive one additional class from the scene's first class.

    Derivation mode is drawn with the configured probabilities; a category
    with no remaining templates falls back to other-category sampling, and
    any residual collision falls back to the first unused template.
    """
    partition = catalog.split_partition(base_split := catalog.by_id[base.template_id].split)
    used_keys = {(c.template_id, c.size_tag) for c in existing}
    used_templates = {c.template_id for c in existing}

    r = stream.random()
    if r < config.derive_resized_prob:
        mode = "resized"
    elif r < config.derive_resized_prob + config.derive_same_category_prob:
        mode = "same-category"
    else:
        mode = "other-category"

    def fresh_size() -> float:
        return stream.uniform(config.target_size_range[0] * config.scene_scale,
                              config.target_size_range[1] * config.scene_scale)

    if mode == "resized":
        for _ in range(4):
            d_new, tag, f = _sample_resized(base, stream, config)
            if (base.template_id, tag) not in used_keys:
                return ObjectClassSpec(
                    class_id=class_id, template_id=base.template_id, category=base.category,
                    d_max=d_new, derivation="resized", size_tag=tag,
                    descriptions=class_descriptions(catalog, base.template_id, tag),
                    resize_factor=f,
                )
        mode = "other-category"  # both size tags already taken

    if mode == "same-category":
        pool = [t for t in partition
                if t.category == base.category and t.template_id not in used_templates]
        if pool:
            t = stream.choice(pool)
            return ObjectClassSpec(
                class_id=class_id, template_id=t.template_id, category=t.category,
                d_max=fresh_size(), derivation="same-category", size_tag="base",
                descriptions=class_descriptions(catalog, t.template_id, "base"),
            )
        mode = "other-category"  # category exhausted

    pool = [t for t in partition
            if t.category != base.category and t.template_id not in used_templates]
    if not pool:
        pool = [t for t in partition if t.template_id not in used_templates]
    if not pool:
        raise InsufficientCatalogError(
            f"split '{base_split}' has no unused template for another class")
    t = stream.choice(pool)
    return ObjectClassSpec(
        class_id=class_id, template_id=t.template_id, category=t.category,
        d_max=fresh_size(), derivation="other-category", size_tag="base",
        descriptions=class_descriptions(catalog, t.template_id, "base"),
    )


def sample_scene_plan(catalog: AssetCatalog, stream: RngStream, config: GeneratorConfig,
                      split: str, scene_index: int = 0) -> ScenePlan:
    sc = config.scaled
    n = stream.randint(*config.count_range)
    n_classes = stream.randint(*config.class_count_range)
    n_dist = stream.randint(*config.distractor_count_range)

    partition = catalog.split_partition(split)
    if len(partition) < n_classes:
        raise InsufficientCatalogError(
            f"split '{split}' holds {len(partition)} templates; plan needs {n_classes}")

    floor = FloorSpec(
        shape="cube" if stream.random() < 0.5 else "cylinder",
        half_extent=stream.uniform(*sc.floor_extent_range),
        thickness=stream.uniform(*sc.floor_thickness_range),
        uv_scale=stream.uniform(*config.uv_scale_range),
    )

    container = None
    if stream.random() < config.container_probability:
        base_extent = stream.uniform(*sc.container_extent_range)
        ax = stream.uniform(*config.container_axis_scale_range)
        ay = stream.uniform(*config.container_axis_scale_range)
        az = stream.uniform(*config.container_axis_scale_range)
        cap = 0.75 * floor.half_extent
        container = ContainerSpec(
            style="dish" if stream.random() < 0.5 else "plate",
            inner_rx=min(base_extent * ax, cap),
            inner_ry=min(base_extent * ay, cap),
            wall_height=stream.uniform(*sc.container_wall_height_range) * az,
            base_thickness=0.02 * config.scene_scale,
            wall_ratio=0.06,
        )

    first_template = stream.choice(partition)
    classes = [ObjectClassSpec(
        class_id=0, template_id=first_template.template_id, category=first_template.category,
        d_max=stream.uniform(*sc.target_size_range), derivation="base", size_tag="base",
        descriptions=class_descriptions(catalog, first_template.template_id, "base"),
    )]
    for k in range(1, n_classes):
        classes.append(build_class_variants(classes[0], catalog, stream, config, classes, k))

    return ScenePlan(
        scene_index=scene_index, split=split, floor=floor, container=container,
        classes=classes, target_count=n, distractor_count=n_dist,
    )


def spawn_instances(plan: ScenePlan, stream: RngStream,
                    config: GeneratorConfig) -> list[InstanceState]:
    """Spawn the counted instances above the floor/container.

    XY is uniform inside the container-AABB ellipse shrunk by the spawn
    margin when a container exists, otherwise uniform in the global range;
    spawn height, orientation and scale jitter are per-instance draws.
    """
    sc = config.scaled
    instances = []
    for i in range(plan.target_count):
        class_id = stream.randint(0, plan.n_classes - 1)
        cls = plan.classes[class_id]
        if plan.container is not None:
            a = max(plan.container.outer_rx - sc.spawn_margin, 0.05)
            b = max(plan.container.outer_ry - sc.spawn_margin, 0.05)
            theta = stream.uniform(0.0, 2.0 * math.pi)
            rad = math.sqrt(stream.random())
            x = a * rad * math.cos(theta)
            y = b * rad * math.sin(theta)
        else:
            x = stream.uniform(*sc.spawn_xy_range)
            y = stream.uniform(*sc.spawn_xy_range)
        z = stream.uniform(*sc.spawn_height_range)
        quat = stream.quaternion()
        gamma = stream.uniform(*config.size_jitter_range)
        instances.append(InstanceState(
            instance_id=i + 1, class_id=class_id, template_id=cls.template_id,
            position=np.array([x, y, z]), quat=quat,
            scale=cls.d_max * gamma, scale_jitter=gamma,
        ))
    return instances


def _aabbs_disjoint(lo_a, hi_a, lo_b, hi_b, margin: float) -> bool:
    return bool(np.any(lo_a - margin > hi_b) or np.any(lo_b - margin > hi_a))


def place_distractors(plan: ScenePlan, settled: list[InstanceState], catalog: AssetCatalog,
                      stream: RngStream, config: GeneratorConfig) -> list[InstanceState]:
    """Place non-repeating scenery objects resting on the floor, AABB-clear
    of every counted object, each other, and the container footprint.

    A distractor that finds no free spot within the attempt budget is
    dropped; the shortfall is recorded in the plan notes.
    """
    sc = config.scaled
    counted_categories = {c.category for c in plan.classes}
    pool = [t for t in catalog.split_partition(plan.split)
            if t.is_distractor_eligible and t.category not in counted_categories]
    stream.shuffle(pool)

    obstacles: list[tuple[np.ndarray, np.ndarray]] = []
    for inst in settled:
        if not inst.alive:
            continue
        template = catalog.by_id[inst.template_id]
        rot = quat_to_matrix(inst.quat)
        lo, hi = rotated_extents(template.mesh.vertices, rot, inst.scale)
        obstacles.append((lo + inst.position, hi + inst.position))
    if plan.container is not None:
        obstacles.append(plan.container.aabb)

    placed: list[InstanceState] = []
    next_id = plan.target_count + 1
    for k in range(plan.distractor_count):
        if k >= len(pool):
            break
        template = pool[k]
        lam = stream.uniform(*config.distractor_scale_multiplier_range)
        scale = sc.distractor_base_scale * lam
        quat = stream.quaternion()
        rot = quat_to_matrix(quat)
        ext_lo, ext_hi = rotated_extents(template.mesh.vertices, rot, scale)
        success = False
        for _ in range(config.distractor_max_attempts):
            span = plan.floor.half_extent
            x = stream.uniform(-span, span)
            y = stream.uniform(-span, span)
            z = -ext_lo[2]  # rest the lowest rotated vertex on the floor
            pos = np.array([x, y, z])
            lo, hi = ext_lo + pos, ext_hi + pos
            if plan.floor.shape == "cube":
                inside = abs(x) + max(ext_hi[0], -ext_lo[0]) <= span and \
                         abs(y) + max(ext_hi[1], -ext_lo[1]) <= span
            else:
                corner = math.hypot(max(ext_hi[0], -ext_lo[0]), max(ext_hi[1], -ext_lo[1]))
                inside = math.hypot(x, y) + corner <= span
            if not inside:
                continue
            if all(_aabbs_disjoint(lo, hi, o_lo, o_hi, sc.distractor_margin)
                   for o_lo, o_hi in obstacles):
                success = True
                break
        if not success:
            continue
        placed.append(InstanceState(
            instance_id=next_id, class_id=-1, template_id=template.template_id,
            position=pos, quat=quat, scale=scale, scale_jitter=1.0, is_distractor=True,
        ))
        obstacles.append((lo, hi))
        next_id += 1

    shortfall = plan.distractor_count - len(placed)
    if shortfall > 0:
        plan.notes["distractor_shortfall"] = shortfall
    return placed
