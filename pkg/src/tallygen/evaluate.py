"""Counting-prediction scoring and dataset statistics.

Predictions are joined against ground truth per (image, class); a model
that says nothing about a pair is scored as having counted zero.  MAE and
RMSE run over every pair; NAE and Acc10% skip pairs whose ground truth is
zero (the ratio is undefined there) with a warning.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class CountPair:
    image_id: int
    class_id: int
    ground_truth: int
    predicted: float


@dataclass
class MetricsReport:
    n: int
    mae: float
    rmse: float
    nae: float
    acc10: float
    per_sample_nae: list[float] = field(default_factory=list)
    nae_excluded: int = 0

    def to_dict(self) -> dict:
        return {"n": self.n, "mae": self.mae, "rmse": self.rmse, "nae": self.nae,
                "acc10": self.acc10, "per_sample_nae": self.per_sample_nae,
                "nae_excluded": self.nae_excluded}


def format_report(report: MetricsReport) -> str:
    return (f"MAE {report.mae:.2f}, RMSE {report.rmse:.2f}, "
            f"NAE {report.nae:.2f}, Acc10% {report.acc10:.2f}")


def count_error_metrics(pairs: list[CountPair]) -> MetricsReport:
    """MAE, RMSE, mean NAE and Acc10% (per-sample NAE <= 0.1, inclusive)."""
    if not pairs:
        raise ValueError("no count pairs to score")
    gt = np.array([p.ground_truth for p in pairs], dtype=np.float64)
    pred = np.array([p.predicted for p in pairs], dtype=np.float64)
    abs_err = np.abs(gt - pred)
    mae = float(abs_err.mean())
    rmse = float(math.sqrt(np.mean((gt - pred) ** 2)))

    valid = gt >= 1
    excluded = int((~valid).sum())
    if excluded:
        log.warning("%d pairs with ground truth 0 excluded from NAE/Acc10%%", excluded)
    if not valid.any():
        raise ValueError("no pairs with ground truth >= 1 for NAE/Acc10%")
    per_nae = (abs_err[valid] / gt[valid]).tolist()
    nae = float(np.mean(per_nae))
    acc10 = float(np.mean([e <= 0.1 for e in per_nae]))

    assert mae <= rmse + 1e-12, "MAE exceeded RMSE"
    return MetricsReport(n=len(pairs), mae=mae, rmse=rmse, nae=nae, acc10=acc10,
                         per_sample_nae=per_nae, nae_excluded=excluded)


def gt_counts_from_coco(coco: dict, include_distractors: bool = True,
                        split: str | None = None) -> dict[tuple[int, int], int]:
    """Ground-truth counts per (image_id, category_id)."""
    image_split = {im["id"]: im.get("extra", {}).get("split") for im in coco["images"]}
    counts: dict[tuple[int, int], int] = {}
    for ann in coco["annotations"]:
        if split is not None and image_split.get(ann["image_id"]) != split:
            continue
        if not include_distractors and ann.get("extra", {}).get("is_distractor", False):
            continue
        key = (ann["image_id"], ann["category_id"])
        counts[key] = counts.get(key, 0) + 1
    return counts


def load_predictions(path: str | Path,
                     ground_truth: dict[tuple[int, int], int]) -> list[CountPair]:
    """Parse a JSON-lines prediction file ({image_id, class_id, count}) and
    join it against ground truth; absent pairs default to a count of zero."""
    path = Path(path)
    predicted: dict[tuple[int, int], float] = {}
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            key = (int(obj["image_id"]), int(obj["class_id"]))
            count = float(obj["count"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {line_no}: malformed prediction ({exc})") from exc
        if key not in ground_truth:
            raise ValueError(f"line {line_no}: unknown (image_id, class_id) pair {key}")
        if key in predicted:
            raise ValueError(f"line {line_no}: duplicate prediction for {key}")
        predicted[key] = count

    pairs = []
    for key in sorted(ground_truth):
        if key not in predicted:
            log.warning("no prediction for (image_id, class_id)=%s; scoring as 0", key)
        pairs.append(CountPair(key[0], key[1], ground_truth[key], predicted.get(key, 0.0)))
    return pairs


def class_imbalance(counts: dict) -> float:
    """Most common counted class count divided by the least common."""
    values = [v for v in counts.values() if v > 0]
    if not values:
        raise ValueError("no counted instances")
    return max(values) / min(values)


def _histogram(values, bins) -> dict:
    hist, edges = np.histogram(values, bins=bins)
    return {"counts": hist.tolist(), "bin_edges": [float(e) for e in edges]}


def dataset_summary(dataset_dir: str | Path) -> dict:
    """Aggregate statistics over a generated dataset directory."""
    dataset_dir = Path(dataset_dir)
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    coco = json.loads((dataset_dir / "coco_annotations.json").read_text())

    per_image_class: dict[int, dict[int, int]] = {}
    distractor_count = 0
    for ann in coco["annotations"]:
        if ann.get("extra", {}).get("is_distractor", False):
            distractor_count += 1
            continue
        img = ann["image_id"]
        per_image_class.setdefault(img, {})
        per_image_class[img][ann["category_id"]] = per_image_class[img].get(ann["category_id"], 0) + 1

    totals = [sum(c.values()) for c in per_image_class.values()]
    imbalances = [class_imbalance(c) for c in per_image_class.values() if c]
    class_counts = [len(c) for c in per_image_class.values()]

    scenes = manifest["scenes"]
    split_tally: dict[str, int] = {}
    for entry in scenes:
        split_tally[entry["split"]] = split_tally.get(entry["split"], 0) + 1

    return {
        "scene_count": len(scenes),
        "ok_scenes": sum(1 for e in scenes if e["status"] == "ok"),
        "discarded_scenes": sum(1 for e in scenes if e["status"] == "discarded"),
        "failed_scenes": sum(1 for e in scenes if e["status"] == "failed"),
        "annotated_images": len(per_image_class),
        "counted_totals": {
            "min": min(totals) if totals else None,
            "max": max(totals) if totals else None,
            "mean": float(np.mean(totals)) if totals else None,
            "histogram": _histogram(totals, bins=np.arange(0, 210, 10)) if totals else None,
        },
        "imbalance": {
            "min": min(imbalances) if imbalances else None,
            "max": max(imbalances) if imbalances else None,
            "histogram": _histogram(imbalances, bins=np.array([1, 1.25, 1.5, 2, 3, 5, 8, 13, 21, 100]))
            if imbalances else None,
        },
        "classes_per_image": {str(k): class_counts.count(k) for k in sorted(set(class_counts))},
        "distractor_annotations": distractor_count,
        "split_scenes": split_tally,
    }
