"""Ground-truth export: COCO annotations, segmentation maps, depth/normal
encodings, exemplar records, prompts, and per-scene metadata.

Bounding boxes are tight on the occluded mask; category ids are stable
functions of (template_id, size_tag) so partial regeneration never
reshuffles them.  Wall-clock timing lives in the run report, not here:
every byte written by this module is deterministic for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .catalog import AssetCatalog
from .composer import InstanceState, ScenePlan
from .config import GeneratorConfig
from .render import BitMask, RenderPasses
from .visibility import FilterOutcome, VisibilityRecord

SIZE_TAGS = ("base", "larger", "smaller")


class CategoryRegistry:
    """Stable dataset-wide category ids for (template, size-variant) pairs."""

    def __init__(self, catalog: AssetCatalog):
        self.catalog = catalog
        self._index = {t.template_id: i for i, t in enumerate(catalog.templates)}

    def category_id(self, template_id: str, size_tag: str) -> int:
        return self._index[template_id] * len(SIZE_TAGS) + SIZE_TAGS.index(size_tag) + 1

    def entry(self, template_id: str, size_tag: str) -> dict:
        template = self.catalog.by_id[template_id]
        from .composer import class_descriptions
        triple = class_descriptions(self.catalog, template_id, size_tag)
        return {
            "id": self.category_id(template_id, size_tag),
            "name": triple.short,
            "supercategory": template.category,
            "extra": {
                "template_id": template_id,
                "size_tag": size_tag,
                "split": template.split,
                "short": triple.short,
                "concise": triple.concise,
                "detailed": triple.detailed,
            },
        }


def tight_bbox(mask) -> tuple[int, int, int, int]:
    """Minimal (x, y, w, h) rectangle covering all set pixels."""
    grid = mask.grid if isinstance(mask, BitMask) else np.asarray(mask)
    rows = np.flatnonzero(grid.any(axis=1))
    cols = np.flatnonzero(grid.any(axis=0))
    if rows.size == 0:
        raise ValueError("empty mask has no bounding box")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass
class AnnotationRecord:
    image_id: int
    instance_id: int
    class_id: int                       # dataset category id
    bbox: tuple[int, int, int, int]
    area: int
    is_distractor: bool
    visibility: float
    exemplar_score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id, "instance_id": self.instance_id,
            "class_id": self.class_id, "bbox": list(self.bbox), "area": self.area,
            "is_distractor": self.is_distractor, "visibility": self.visibility,
            "exemplar_score": self.exemplar_score,
        }


@dataclass
class ExemplarRecord:
    image_id: int
    class_id: int
    instance_id: int                    # -1 for external exemplars
    bbox: tuple[int, int, int, int] | None
    score: float
    kind: str                           # "internal" | "external"
    path: str | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id, "class_id": self.class_id,
            "instance_id": self.instance_id,
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "score": self.score, "kind": self.kind, "path": self.path,
        }


@dataclass
class PromptSet:
    positives: dict[int, tuple[str, str, str]]    # category_id -> (short, concise, detailed)

    def negatives_for(self, class_id: int) -> list[tuple[str, str, str]]:
        return [v for k, v in sorted(self.positives.items()) if k != class_id]

    def to_dict(self) -> dict:
        return {str(k): {"short": v[0], "concise": v[1], "detailed": v[2]}
                for k, v in sorted(self.positives.items())}


def score_internal_exemplars(records: list[VisibilityRecord],
                             class_of: dict[int, int],
                             image_id: int,
                             mode: str = "visibility_area") -> list[ExemplarRecord]:
    """Quality scores for in-image exemplars, normalized per (image, class).

    The weight is visibility * visible-pixel-area (or pure area in "area"
    mode); the best instance of each class scores exactly 1.0.  Bounding
    boxes are attached by the caller.
    """
    by_class: dict[int, list[VisibilityRecord]] = {}
    for rec in records:
        if rec.instance_id in class_of and rec.area_occluded > 0:
            by_class.setdefault(class_of[rec.instance_id], []).append(rec)
    out: list[ExemplarRecord] = []
    for class_id in sorted(by_class):
        group = by_class[class_id]
        weights = {r.instance_id: (r.visibility * r.area_occluded if mode == "visibility_area"
                                   else float(r.area_occluded)) for r in group}
        top = max(weights.values())
        if top <= 0:
            continue
        ranked = sorted(group, key=lambda r: (-weights[r.instance_id], r.instance_id))
        for r in ranked:
            out.append(ExemplarRecord(
                image_id=image_id, class_id=class_id, instance_id=r.instance_id,
                bbox=None, score=weights[r.instance_id] / top, kind="internal",
            ))
    return out


@dataclass
class SceneAnnotations:
    image_id: int
    annotations: list[AnnotationRecord]
    exemplars: list[ExemplarRecord]
    prompts: PromptSet
    category_ids: list[int]
    diagnostics: dict = field(default_factory=dict)


def annotate_scene(plan: ScenePlan, instances: dict[int, InstanceState],
                   outcome: FilterOutcome, registry: CategoryRegistry,
                   config: GeneratorConfig) -> SceneAnnotations:
    """Derive all per-scene ground truth from the final passes."""
    image_id = plan.scene_index
    ids_map = outcome.passes.instance_ids
    rec_by_id = {r.instance_id: r for r in outcome.records}

    class_of: dict[int, int] = {}
    for k, inst in instances.items():
        if inst.is_distractor:
            cat = registry.category_id(inst.template_id, "base")
        else:
            cls = plan.classes[inst.class_id]
            cat = registry.category_id(cls.template_id, cls.size_tag)
        class_of[k] = cat

    annotated_ids = []
    hidden_distractors = []
    for rec in outcome.records:
        if rec.area_occluded > 0 and bool(np.any(ids_map == rec.instance_id)):
            annotated_ids.append(rec.instance_id)
        elif rec.is_distractor:
            hidden_distractors.append(rec.instance_id)

    exemplars = score_internal_exemplars(
        [rec_by_id[k] for k in annotated_ids if not rec_by_id[k].is_distractor],
        class_of, image_id, config.exemplar_score_mode)
    score_of = {e.instance_id: e.score for e in exemplars}

    annotations = []
    for k in sorted(annotated_ids):
        mask = ids_map == k
        bbox = tight_bbox(mask)
        rec = rec_by_id[k]
        annotations.append(AnnotationRecord(
            image_id=image_id, instance_id=k, class_id=class_of[k],
            bbox=bbox, area=int(mask.sum()), is_distractor=rec.is_distractor,
            visibility=rec.visibility, exemplar_score=score_of.get(k, 0.0),
        ))
    bbox_of = {a.instance_id: a.bbox for a in annotations}
    for e in exemplars:
        e.bbox = bbox_of.get(e.instance_id)

    # External exemplar references, one per counted class present.
    present_classes = sorted({a.class_id for a in annotations if not a.is_distractor})
    cat_to_template = {}
    for cls in plan.classes:
        cat_to_template[registry.category_id(cls.template_id, cls.size_tag)] = cls.template_id
    for cat in present_classes:
        exemplars.append(ExemplarRecord(
            image_id=image_id, class_id=cat, instance_id=-1, bbox=None, score=1.0,
            kind="external", path=f"catalog/exemplars/{cat_to_template[cat]}.png",
        ))

    prompts = PromptSet(positives={
        registry.category_id(c.template_id, c.size_tag): c.descriptions.as_tuple()
        for c in plan.classes
        if registry.category_id(c.template_id, c.size_tag) in {a.class_id for a in annotations}
    })

    category_ids = sorted({a.class_id for a in annotations})
    diagnostics = dict(outcome.notes)
    if hidden_distractors:
        diagnostics["hidden_distractors"] = hidden_distractors
    return SceneAnnotations(image_id, annotations, exemplars, prompts, category_ids, diagnostics)


def export_coco(scene_annotations: list[SceneAnnotations], registry: CategoryRegistry,
                image_info: dict[int, dict]) -> dict:
    """COCO document covering the given scenes.

    Categories carry the description triple in `extra`; annotations carry
    `is_distractor`, visibility and the exemplar score.  Raises on
    duplicate ids.
    """
    images = [
        {"id": img_id, "file_name": info["file_name"],
         "width": info["width"], "height": info["height"],
         "extra": {"split": info["split"]}}
        for img_id, info in sorted(image_info.items())
    ]
    if len({im["id"] for im in images}) != len(images):
        raise ValueError("duplicate image ids")

    annotations = []
    cat_keys: set[int] = set()
    for sa in scene_annotations:
        for run_idx, rec in enumerate(sa.annotations, start=1):
            annotations.append({
                "id": sa.image_id * 10_000 + run_idx,
                "image_id": sa.image_id,
                "category_id": rec.class_id,
                "bbox": list(rec.bbox),
                "area": rec.area,
                "iscrowd": 0,
                "extra": {
                    "instance_id": rec.instance_id,
                    "is_distractor": rec.is_distractor,
                    "visibility": rec.visibility,
                    "exemplar_score": rec.exemplar_score,
                },
            })
        cat_keys.update(sa.category_ids)
    if len({a["id"] for a in annotations}) != len(annotations):
        raise ValueError("duplicate annotation ids")

    id_to_key: dict[int, tuple[str, str]] = {}
    for t in registry.catalog.templates:
        for tag in SIZE_TAGS:
            id_to_key[registry.category_id(t.template_id, tag)] = (t.template_id, tag)
    categories = [registry.entry(*id_to_key[cid]) for cid in sorted(cat_keys)]

    return {"images": images, "annotations": annotations, "categories": categories}


def export_segmentation_maps(passes: RenderPasses, class_of: dict[int, int]
                             ) -> tuple[np.ndarray, np.ndarray]:
    """(instance PNG array, class PNG array) as uint16; background 0."""
    ids = passes.instance_ids
    inst_png = ids.astype(np.uint16)
    class_png = np.zeros_like(inst_png)
    for k, cat in class_of.items():
        class_png[ids == k] = np.uint16(cat)
    return inst_png, class_png


# --- image encodings ---------------------------------------------------------

def encode_depth(depth: np.ndarray) -> tuple[np.ndarray, float]:
    """Fixed-point 16-bit depth; value 0 marks pixels with no hit and
    depth = (value - 1) / 65534 * depth_max elsewhere."""
    finite = np.isfinite(depth)
    depth_max = float(depth[finite].max()) if finite.any() else 1.0
    out = np.zeros(depth.shape, dtype=np.uint16)
    if finite.any() and depth_max > 0:
        out[finite] = (np.rint(depth[finite] / depth_max * 65534.0) + 1).astype(np.uint16)
    return out, depth_max


def encode_normals(normals: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((normals + 1.0) * 0.5 * 255.0), 0, 255).astype(np.uint8)


def save_rgb_png(arr: np.ndarray, path: Path) -> None:
    Image.fromarray(arr, mode="RGB").save(path)


def save_gray16_png(arr: np.ndarray, path: Path) -> None:
    Image.fromarray(arr.astype("<u2"), mode="I;16").save(path)


def load_gray16_png(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.uint16)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_scene_record(path: Path, plan: ScenePlan, camera_dict: dict | None,
                       outcome: FilterOutcome | None,
                       annotations: SceneAnnotations | None,
                       instances: list[InstanceState],
                       work_counters: dict,
                       config: GeneratorConfig,
                       seeds: dict,
                       lights: dict | None = None,
                       depth_max: float | None = None,
                       status: str = "ok",
                       discard_reason: str | None = None) -> dict:
    """Assemble and write the per-scene metadata JSON; returns the record.

    The timing section holds deterministic work counters (ray/merge/retry
    counts); wall-clock timings go to the run report so regenerating a
    scene reproduces this file byte for byte.
    """
    transform_summary = {}
    if instances:
        zs = [float(i.position[2]) for i in instances if i.alive]
        transform_summary = {
            "alive_instances": sum(1 for i in instances if i.alive),
            "z_min": min(zs) if zs else None,
            "z_max": max(zs) if zs else None,
            "scale_min": min(i.scale for i in instances),
            "scale_max": max(i.scale for i in instances),
        }

    diagnostics: dict = {}
    if outcome is not None:
        diagnostics["removed"] = outcome.removed
        diagnostics["filter_rounds"] = outcome.rounds
    if annotations is not None:
        diagnostics.update(annotations.diagnostics)
    if discard_reason is not None:
        diagnostics["discard_reason"] = discard_reason
    if plan.notes:
        diagnostics["plan_notes"] = plan.notes

    record = {
        "generator_version": _generator_version(),
        "scene_index": plan.scene_index,
        "split": plan.split,
        "status": status,
        "seeds": seeds,
        "config_hash": config.identity_hash(),
        "class_definitions": [c.to_dict() for c in plan.classes],
        "object_records": [i.to_dict() for i in instances],
        "camera": camera_dict,
        "transform_summaries": transform_summary,
        "error_diagnostics": diagnostics,
        "timings": work_counters,
        "floor": plan.floor.to_dict(),
        "container": plan.container.to_dict() if plan.container else None,
        "lighting": lights,
        "target_count": plan.target_count,
        "distractor_target": plan.distractor_count,
    }
    if outcome is not None:
        record["visibility_records"] = [r.to_dict() for r in outcome.records]
        record["retained_ids"] = outcome.retained_ids
    if annotations is not None:
        record["annotations"] = [a.to_dict() for a in annotations.annotations]
        record["exemplars"] = [e.to_dict() for e in annotations.exemplars]
        record["prompts"] = annotations.prompts.to_dict()
    if depth_max is not None:
        record["depth_encoding"] = {"depth_max": depth_max,
                                    "rule": "depth = (value - 1) / 65534 * depth_max; 0 = no hit"}
    if status == "ok":
        record["paths"] = {
            "rgb": "rgb.png", "instances": "instances.png", "classes": "classes.png",
            "depth": "depth.png", "normals": "normals.png", "coco": "coco.json",
        }
    path.write_text(canonical_json(record))
    return record


def _generator_version() -> str:
    from . import GENERATOR_VERSION
    return GENERATOR_VERSION
