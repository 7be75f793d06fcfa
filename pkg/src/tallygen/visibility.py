"""Per-instance visibility measurement and over-occlusion rejection.

Visibility is the ratio of an instance's visible (nearest-hit) pixels to
the pixels it would cover rendered alone.  Counted objects whose origin
leaves the frame or whose occlusion crosses the threshold are removed,
all violators at once, and the scene is re-merged until a fixpoint:
removal only ever increases the visibility of the remaining objects.
Distractors are scenery: measured and reported but never removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraSpec, project_origin
from .config import GeneratorConfig
from .render import BitMask, FrameCast, RenderPasses, SceneRenderer


@dataclass
class VisibilityRecord:
    instance_id: int
    area_occluded: int
    area_unoccluded: int
    visibility: float
    occlusion: float
    origin_in_frame: bool
    is_distractor: bool = False

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "area_occluded": self.area_occluded,
            "area_unoccluded": self.area_unoccluded,
            "visibility": self.visibility,
            "occlusion": self.occlusion,
            "origin_in_frame": self.origin_in_frame,
            "is_distractor": self.is_distractor,
        }


def visibility_ratio(m_occluded: BitMask, m_unoccluded: BitMask) -> float:
    """|occluded| / |unoccluded|, 0 when the unoccluded mask is empty.

    Raises on dimension mismatch or when the occluded mask is not a
    pixelwise subset of the unoccluded mask (a renderer bug upstream).
    """
    if m_occluded.grid.shape != m_unoccluded.grid.shape:
        raise ValueError("mask dimensions differ")
    if bool(np.any(m_occluded.grid & ~m_unoccluded.grid)):
        raise ValueError("occluded mask is not a subset of the unoccluded mask")
    if m_unoccluded.area == 0:
        return 0.0
    return m_occluded.area / m_unoccluded.area


@dataclass
class FilterOutcome:
    retained_ids: list[int]
    removed: list[dict]
    discard: bool
    passes: RenderPasses
    records: list[VisibilityRecord]
    rounds: int = 0
    notes: dict = field(default_factory=dict)


def _violates(occ: float, config: GeneratorConfig) -> bool:
    t = config.visibility_occlusion_threshold
    if config.threshold_on == "occlusion":
        return occ >= t
    return (1.0 - occ) < t


def filter_scene(scene: SceneRenderer, camera: CameraSpec,
                 config: GeneratorConfig) -> FilterOutcome:
    """Remove origin-out-of-frame and over-occluded counted objects, then
    re-render until every retained object satisfies the threshold."""
    cast = FrameCast(scene, camera)
    counted = [k for k in scene.instance_keys() if not scene.instances[k].is_distractor]
    distractors = [k for k in scene.instance_keys() if scene.instances[k].is_distractor]

    unocc_area: dict[int, int] = {}
    origin_ok: dict[int, bool] = {}
    for k in counted + distractors:
        unocc_area[k] = cast.unoccluded_mask(k).area
        origin_ok[k] = project_origin(camera, scene.instances[k].position) is not None

    retained = list(counted)
    removed: list[dict] = []
    rounds = 0
    while True:
        rounds += 1
        buffers = cast.buffers(retained + distractors)
        occ_areas = cast.occluded_areas(buffers)
        violators = []
        for k in retained:
            area_u = unocc_area[k]
            vis = occ_areas.get(k, 0) / area_u if area_u > 0 else 0.0
            occ = 1.0 - vis
            if not origin_ok[k]:
                violators.append((k, "origin-out-of-frame", occ))
            elif _violates(occ, config):
                violators.append((k, "over-occluded", occ))
        if not violators:
            break
        for k, reason, occ in violators:
            removed.append({"instance_id": k, "reason": reason, "occlusion": occ})
        gone = {k for k, _, _ in violators}
        retained = [k for k in retained if k not in gone]
        if not retained:
            break

    discard = not retained
    final_keys = retained + distractors
    passes = cast.passes(final_keys)
    final_occ = cast.occluded_areas(cast.buffers(final_keys))

    records = []
    for k in final_keys:
        area_u = unocc_area[k]
        area_o = final_occ.get(k, 0)
        vis = area_o / area_u if area_u > 0 else 0.0
        records.append(VisibilityRecord(
            instance_id=k, area_occluded=area_o, area_unoccluded=area_u,
            visibility=vis, occlusion=1.0 - vis, origin_in_frame=origin_ok[k],
            is_distractor=scene.instances[k].is_distractor,
        ))
    return FilterOutcome(retained_ids=sorted(retained), removed=removed,
                         discard=discard, passes=passes, records=records, rounds=rounds)


def assert_visibility_guarantee(final_passes: RenderPasses, retained: list[int],
                                v_t: float) -> bool:
    """Recompute occlusion from the final passes; True iff every retained
    instance ends below the occlusion threshold (vacuously true when empty)."""
    ids = final_passes.instance_ids
    counts = np.bincount(ids[ids > 0], minlength=1) if ids.max(initial=0) > 0 else np.zeros(1, int)
    for k in retained:
        mask_u = final_passes.per_instance_unoccluded.get(k)
        area_u = mask_u.area if mask_u is not None else 0
        area_o = int(counts[k]) if k < len(counts) else 0
        vis = area_o / area_u if area_u > 0 else 0.0
        if 1.0 - vis >= v_t:
            return False
    return True
