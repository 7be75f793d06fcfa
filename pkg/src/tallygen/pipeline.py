"""End-to-end dataset generation, regeneration, and summarization.

Scenes are the unit of parallelism: every scene derives its own random
streams from (master_seed, scene_index, stage), so output bytes are
invariant to worker count and completion order.  A discarded scene is
resampled with retry-derived streams without touching its neighbors.
Wall-clock timings go to a separate run report so the dataset tree itself
is reproducible byte for byte.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import GENERATOR_VERSION
from .annotate import (CategoryRegistry, SceneAnnotations, annotate_scene,
                       canonical_json, encode_depth, encode_normals,
                       export_coco, export_segmentation_maps, save_gray16_png,
                       save_rgb_png, write_scene_record)
from .camera import sample_camera
from .catalog import AssetCatalog, build_catalog
from .composer import place_distractors, sample_scene_plan, spawn_instances
from .config import GeneratorConfig
from .evaluate import dataset_summary
from .render import SceneRenderer, counted_framing, render_external_exemplar
from .rng import derive_stream, stable_hash64
from .settle import SettleParams, settle
from .visibility import filter_scene

SPLITS = ("train", "val", "test")


def scene_split(scene_index: int, split_ratios) -> str:
    """Stable split assignment for a scene index."""
    u = stable_hash64("scene-split", scene_index) / 2.0 ** 64
    acc = 0.0
    for ratio, label in zip(split_ratios, SPLITS):
        acc += ratio
        if u < acc:
            return label
    return SPLITS[-1]


def _stage_label(stage: str, attempt: int) -> str:
    return stage if attempt == 0 else f"retry{attempt}:{stage}"


def scene_dir(output_dir: Path, scene_index: int) -> Path:
    return output_dir / "scenes" / f"scene_{scene_index:05d}"


def generate_scene(scene_index: int, catalog: AssetCatalog, registry: CategoryRegistry,
                   config: GeneratorConfig, output_dir: Path) -> tuple[dict, dict]:
    """Run one scene end to end; returns (manifest entry, wall timings)."""
    t_start = time.perf_counter()
    split = scene_split(scene_index, config.split_ratios)
    sdir = scene_dir(output_dir, scene_index)
    sdir.mkdir(parents=True, exist_ok=True)
    seed = config.master_seed
    timings: dict[str, float] = {}
    work = {"attempts": 0, "filter_rounds": 0, "entities_rendered": 0}
    last_plan = None

    for attempt in range(config.retry_limit):
        work["attempts"] = attempt + 1
        lab = lambda stage: _stage_label(stage, attempt)

        t0 = time.perf_counter()
        plan = sample_scene_plan(catalog, derive_stream(seed, scene_index, lab("plan")),
                                 config, split, scene_index=scene_index)
        last_plan = plan
        counted = spawn_instances(plan, derive_stream(seed, scene_index, lab("spawn")), config)
        timings["plan"] = timings.get("plan", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        settle(counted, plan.floor, plan.container, SettleParams.from_config(config),
               derive_stream(seed, scene_index, lab("settle")), catalog,
               spawn_margin=config.scaled.spawn_margin)
        timings["settle"] = timings.get("settle", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        distractors = place_distractors(plan, counted, catalog,
                                        derive_stream(seed, scene_index, lab("distractors")),
                                        config)
        instances = counted + distractors
        timings["distractors"] = timings.get("distractors", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        scene = SceneRenderer(plan, instances, catalog, config,
                              derive_stream(seed, scene_index, lab("style")))
        framing, centroid = counted_framing(plan, counted, catalog)
        camera = sample_camera(framing, centroid,
                               derive_stream(seed, scene_index, lab("camera")), config)
        outcome = filter_scene(scene, camera, config)
        work["filter_rounds"] += outcome.rounds
        work["entities_rendered"] += len(scene.entities)
        timings["render_filter"] = timings.get("render_filter", 0.0) + time.perf_counter() - t0

        if outcome.discard:
            continue

        t0 = time.perf_counter()
        annotations = annotate_scene(plan, scene.instances, outcome, registry, config)
        class_of = {a.instance_id: a.class_id for a in annotations.annotations}
        inst_png, class_png = export_segmentation_maps(outcome.passes, class_of)
        depth_png, depth_max = encode_depth(outcome.passes.depth)
        normals_png = encode_normals(outcome.passes.normals)
        timings["annotate"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        save_rgb_png(outcome.passes.rgb, sdir / "rgb.png")
        save_gray16_png(inst_png, sdir / "instances.png")
        save_gray16_png(class_png, sdir / "classes.png")
        save_gray16_png(depth_png, sdir / "depth.png")
        save_rgb_png(normals_png, sdir / "normals.png")
        image_info = {scene_index: {
            "file_name": f"scenes/scene_{scene_index:05d}/rgb.png",
            "width": config.resolution, "height": config.resolution, "split": split,
        }}
        (sdir / "coco.json").write_text(
            canonical_json(export_coco([annotations], registry, image_info)))
        record = write_scene_record(
            sdir / "metadata.json", plan, camera.to_dict(), outcome, annotations,
            instances, work, config,
            seeds={"master_seed": seed, "scene_index": scene_index, "attempt": attempt},
            lights=scene.lights.to_dict(), depth_max=depth_max, status="ok")
        timings["export"] = time.perf_counter() - t0
        timings["total"] = time.perf_counter() - t_start

        entry = {
            "index": scene_index, "split": split, "status": "ok",
            "attempts": attempt + 1,
            "retained": len(outcome.retained_ids),
            "annotations": len(annotations.annotations),
            "paths": {k: f"scenes/scene_{scene_index:05d}/{v}"
                      for k, v in record["paths"].items()},
            "work": work,
        }
        return entry, timings

    # Every attempt was discarded: record the discard.
    for stale in ("rgb.png", "instances.png", "classes.png", "depth.png",
                  "normals.png", "coco.json"):
        (sdir / stale).unlink(missing_ok=True)
    write_scene_record(
        sdir / "metadata.json", last_plan, None, None, None, [], work, config,
        seeds={"master_seed": seed, "scene_index": scene_index,
               "attempt": config.retry_limit - 1},
        status="discarded",
        discard_reason=f"all counted objects rejected in {config.retry_limit} attempts")
    timings["total"] = time.perf_counter() - t_start
    entry = {"index": scene_index, "split": split, "status": "discarded",
             "attempts": config.retry_limit, "retained": 0, "annotations": 0,
             "paths": {"metadata": f"scenes/scene_{scene_index:05d}/metadata.json"},
             "work": work}
    return entry, timings


def _scene_complete(sdir: Path, config: GeneratorConfig) -> dict | None:
    """Return the stored metadata when the scene is already generated with
    the same content-identity config."""
    meta_path = sdir / "metadata.json"
    if not meta_path.exists():
        return None
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError:
        return None
    if meta.get("config_hash") != config.identity_hash():
        return None
    if meta.get("status") not in ("ok", "discarded"):
        return None
    if meta["status"] == "ok":
        for name in meta.get("paths", {}).values():
            if not (sdir / name).exists():
                return None
    return meta


def _entry_from_metadata(meta: dict, scene_index: int) -> dict:
    prefix = f"scenes/scene_{scene_index:05d}"
    if meta["status"] == "ok":
        paths = {k: f"{prefix}/{v}" for k, v in meta["paths"].items()}
    else:
        paths = {"metadata": f"{prefix}/metadata.json"}
    return {
        "index": scene_index, "split": meta["split"], "status": meta["status"],
        "attempts": meta["timings"].get("attempts", 1),
        "retained": len(meta.get("retained_ids", [])),
        "annotations": len(meta.get("annotations", [])),
        "paths": paths, "work": meta["timings"],
    }


_WORKER_STATE: dict = {}


def _worker_init(config: GeneratorConfig, output_dir: str):
    catalog = build_catalog(config, derive_stream(config.master_seed, 0, "catalog"))
    _WORKER_STATE["catalog"] = catalog
    _WORKER_STATE["registry"] = CategoryRegistry(catalog)
    _WORKER_STATE["config"] = config
    _WORKER_STATE["output_dir"] = Path(output_dir)


def _worker_run(scene_index: int):
    try:
        entry, timings = generate_scene(
            scene_index, _WORKER_STATE["catalog"], _WORKER_STATE["registry"],
            _WORKER_STATE["config"], _WORKER_STATE["output_dir"])
        return scene_index, entry, timings, None
    except Exception as exc:  # noqa: BLE001 - per-scene failures never abort the batch
        return scene_index, None, {}, f"{type(exc).__name__}: {exc}"


def write_catalog_assets(catalog: AssetCatalog, config: GeneratorConfig,
                         output_dir: Path) -> None:
    cat_dir = output_dir / "catalog"
    ex_dir = cat_dir / "exemplars"
    ex_dir.mkdir(parents=True, exist_ok=True)
    (cat_dir / "manifest.json").write_text(canonical_json(catalog.manifest()))
    for template in catalog.templates:
        path = ex_dir / f"{template.template_id}.png"
        if not path.exists():
            save_rgb_png(render_external_exemplar(template, config.exemplar_resolution), path)


def merge_coco(output_dir: Path, entries: list[dict]) -> dict:
    """Assemble the dataset-level COCO file from the per-scene documents."""
    images, annotations = [], []
    categories: dict[int, dict] = {}
    for entry in sorted(entries, key=lambda e: e["index"]):
        if entry["status"] != "ok":
            continue
        doc = json.loads((scene_dir(output_dir, entry["index"]) / "coco.json").read_text())
        images.extend(doc["images"])
        annotations.extend(doc["annotations"])
        for cat in doc["categories"]:
            categories[cat["id"]] = cat
    merged = {
        "images": images,
        "annotations": annotations,
        "categories": [categories[k] for k in sorted(categories)],
    }
    (output_dir / "coco_annotations.json").write_text(canonical_json(merged))
    return merged


def write_preview_grid(output_dir: Path, entries: list[dict], thumb: int = 128) -> Path:
    """n x m grid of downscaled scene renders."""
    ok = [e for e in sorted(entries, key=lambda e: e["index"]) if e["status"] == "ok"]
    path = output_dir / "preview.png"
    if not ok:
        Image.new("RGB", (thumb, thumb), (30, 30, 30)).save(path)
        return path
    cols = int(np.ceil(np.sqrt(len(ok))))
    rows = int(np.ceil(len(ok) / cols))
    grid = Image.new("RGB", (cols * thumb, rows * thumb), (30, 30, 30))
    for i, entry in enumerate(ok):
        img = Image.open(scene_dir(output_dir, entry["index"]) / "rgb.png")
        img = img.resize((thumb, thumb), Image.BILINEAR)
        grid.paste(img, ((i % cols) * thumb, (i // cols) * thumb))
    grid.save(path)
    return path


def generate_dataset(config: GeneratorConfig, scenes: int | None = None,
                     workers: int | None = None, output_dir: str | Path | None = None) -> dict:
    """Generate (or resume) a dataset; returns the manifest dict.

    The directory layout is deterministic for a given config; re-running
    over a partial directory completes only the missing scenes.
    """
    scene_count = config.scene_count if scenes is None else scenes
    n_workers = config.workers if workers is None else workers
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    t_start = time.perf_counter()
    catalog = build_catalog(config, derive_stream(config.master_seed, 0, "catalog"))
    registry = CategoryRegistry(catalog)
    write_catalog_assets(catalog, config, out)

    pending, entries, wall = [], {}, {}
    for i in range(scene_count):
        meta = _scene_complete(scene_dir(out, i), config)
        if meta is not None:
            entries[i] = _entry_from_metadata(meta, i)
        else:
            pending.append(i)

    failures: dict[int, str] = {}
    if pending:
        if n_workers > 1:
            ctx = mp.get_context("fork")
            with ctx.Pool(n_workers, initializer=_worker_init,
                          initargs=(config, str(out))) as pool:
                for idx, entry, timings, err in pool.imap_unordered(_worker_run, pending):
                    if err is not None:
                        failures[idx] = err
                    else:
                        entries[idx] = entry
                        wall[idx] = timings
        else:
            _worker_init(config, str(out))
            for i in pending:
                idx, entry, timings, err = _worker_run(i)
                if err is not None:
                    failures[idx] = err
                else:
                    entries[idx] = entry
                    wall[idx] = timings

    for idx, err in failures.items():
        entries[idx] = {"index": idx, "split": scene_split(idx, config.split_ratios),
                        "status": "failed", "attempts": 0, "retained": 0,
                        "annotations": 0, "paths": {}, "work": {}, "error": err}

    entry_list = [entries[i] for i in sorted(entries)]
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "config": config.to_dict(),
        "config_hash": config.identity_hash(),
        "scene_count": scene_count,
        "split_table": {str(e["index"]): e["split"] for e in entry_list},
        "scenes": entry_list,
    }
    (out / "manifest.json").write_text(canonical_json(manifest))
    merge_coco(out, entry_list)
    write_preview_grid(out, entry_list)
    (out / "summary.json").write_text(canonical_json(dataset_summary(out)))

    if config.write_run_report:
        total = time.perf_counter() - t_start
        report = {
            "workers": n_workers,
            "scenes_generated": len(wall),
            "total_wall_seconds": total,
            "mean_seconds_per_generated_scene":
                (sum(t.get("total", 0.0) for t in wall.values()) / len(wall)) if wall else 0.0,
            "wall_per_scene": {str(k): wall[k] for k in sorted(wall)},
        }
        (out / "run_report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return manifest


def regenerate_scene(config: GeneratorConfig, scene_index: int,
                     output_dir: str | Path | None = None) -> dict:
    """Regenerate a single scene; bytes match the same index from a full run."""
    if not (0 <= scene_index < config.scene_count):
        raise IndexError(f"scene index {scene_index} outside [0, {config.scene_count})")
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog = build_catalog(config, derive_stream(config.master_seed, 0, "catalog"))
    registry = CategoryRegistry(catalog)
    entry, _ = generate_scene(scene_index, catalog, registry, config, out)
    return entry


def summarize(dataset_dir: str | Path) -> dict:
    """Aggregate statistics plus a preview grid for an existing dataset."""
    dataset_dir = Path(dataset_dir)
    manifest_path = dataset_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {dataset_dir}")
    manifest = json.loads(manifest_path.read_text())
    summary = dataset_summary(dataset_dir)
    (dataset_dir / "summary.json").write_text(canonical_json(summary))
    write_preview_grid(dataset_dir, manifest["scenes"])
    return summary
