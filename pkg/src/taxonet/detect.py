"""Two-step detect-then-classify on top of the trained classifier.

Region proposals are sliding windows (square, multiple scales); each
proposal is cropped, resized to the model input, normalized with the
checkpoint's stats and classified. Class-agnostic greedy NMS turns the
dense proposals into discrete detections. Regions are axis-aligned
rectangles, exported as 4-corner polygons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass


from .batches import normalize_batch
from .checkpoint import Checkpoint
from .errors import ValidationError
from .imageops import crop, resize_bilinear
from .ppm import ImageRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"region {self} must have positive extent")

    def rect(self):
        return (self.x, self.y, self.w, self.h)

    def area(self) -> int:
        return self.w * self.h

    def as_polygon(self):
        """Axis-aligned rectangle as its 4 corners, clockwise from top-left."""
        return [(self.x, self.y), (self.x + self.w, self.y),
                (self.x + self.w, self.y + self.h), (self.x, self.y + self.h)]

    def to_dict(self):
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class Detection:
    region: Region
    cls: str
    score: float

    def to_dict(self):
        d = self.region.to_dict()
        d["class"] = self.cls
        d["score"] = self.score
        d["polygon"] = [list(p) for p in self.region.as_polygon()]
        return d


def iou(a: Region, b: Region) -> float:
    """Intersection over union of two regions; 0 when disjoint."""
    x0 = max(a.x, b.x)
    y0 = max(a.y, b.y)
    x1 = min(a.x + a.w, b.x + b.w)
    y1 = min(a.y + a.h, b.y + b.h)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    inter = (x1 - x0) * (y1 - y0)
    return inter / (a.area() + b.area() - inter)


def _axis_positions(extent: int, window: int, stride: int) -> list[int]:
    positions = list(range(0, extent - window + 1, stride))
    last = extent - window
    if positions[-1] != last:
        positions.append(last)  # flush window so the far edge is covered
    return positions


def propose_regions(image: ImageRecord, scales, stride_fraction: float) -> list[Region]:
    """Square sliding windows at each scale, ordered (scale, row, col)."""
    scales = list(scales)
    if not scales:
        raise ValidationError("at least one proposal scale is required")
    if not 0 < stride_fraction <= 1:
        raise ValidationError(
            f"stride_fraction must lie in (0, 1], got {stride_fraction}"
        )
    regions = []
    for s in scales:
        s = int(s)
        if s < 1 or s > image.width or s > image.height:
            raise ValidationError(
                f"scale {s} exceeds image dims {image.width}x{image.height}"
            )
        stride = max(1, int(round(stride_fraction * s)))
        for y in _axis_positions(image.height, s, stride):
            for x in _axis_positions(image.width, s, stride):
                regions.append(Region(x=x, y=y, w=s, h=s))
    return regions


def classify_regions(ckpt: Checkpoint, image: ImageRecord, regions,
                     precision="float32") -> list[Detection]:
    """Crop, resize to the model input, normalize with checkpoint stats and
    classify each region. Score is the max softmax probability."""
    net = ckpt.to_net(precision)
    c, h, w = ckpt.arch.input_size
    crops = []
    kept_regions = []
    for r in regions:
        if (r.x < 0 or r.y < 0 or r.x + r.w > image.width
                or r.y + r.h > image.height or r.w < 1 or r.h < 1):
            logger.warning("skipping degenerate region %s on %dx%d image",
                           r, image.width, image.height)
            continue
        piece = crop(image, r.rect())
        if (piece.height, piece.width) != (h, w):
            piece = resize_bilinear(piece, out_w=w, out_h=h)
        crops.append(piece)
        kept_regions.append(r)
    if not crops:
        return []
    x = normalize_batch(crops, ckpt.normalization, precision=precision)
    probs = net.forward(x)
    idx = probs.argmax(axis=1)
    return [
        Detection(region=r, cls=ckpt.class_names[int(k)],
                  score=float(probs[i, k]))
        for i, (r, k) in enumerate(zip(kept_regions, idx))
    ]


def nms(detections, iou_threshold: float = 0.5, score_threshold: float = 0.3,
        per_class: bool = False) -> list[Detection]:
    """Greedy non-maximum suppression.

    Detections below ``score_threshold`` are dropped; the highest-score
    detection is kept and any remaining detection with IoU strictly above
    ``iou_threshold`` against a kept one is removed. Ties break toward the
    earlier proposal. Class-agnostic unless ``per_class``.
    """
    if not 0 <= iou_threshold <= 1 or not 0 <= score_threshold <= 1:
        raise ValidationError("nms thresholds must lie in [0, 1]")
    candidates = [d for d in detections if d.score >= score_threshold]
    order = sorted(range(len(candidates)),
                   key=lambda i: (-candidates[i].score, i))
    kept: list[Detection] = []
    for i in order:
        d = candidates[i]
        clash = any(
            (not per_class or k.cls == d.cls)
            and iou(d.region, k.region) > iou_threshold
            for k in kept
        )
        if not clash:
            kept.append(d)
    return kept


@dataclass
class ClassDetectionMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    precision_defined: bool

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall,
                "precision_defined": self.precision_defined}


def evaluate_detections(detections_per_image, ground_truth_per_image,
                        iou_threshold: float = 0.5
                        ) -> dict[str, ClassDetectionMetrics]:
    """Greedy matching by descending score; a detection is a true positive
    when it overlaps an unmatched same-class ground-truth region with
    IoU >= threshold. Each ground truth matches at most once."""
    if len(detections_per_image) != len(ground_truth_per_image):
        raise ValidationError("detections and ground truth must align per image")
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}

    def bump(d, key):
        d[key] = d.get(key, 0) + 1

    for dets, gts in zip(detections_per_image, ground_truth_per_image):
        gts = list(gts)
        matched = [False] * len(gts)
        order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
        for i in order:
            det = dets[i]
            best_j = -1
            best_iou = 0.0
            for j, (region, cls) in enumerate(gts):
                if matched[j] or cls != det.cls:
                    continue
                v = iou(det.region, region)
                if v >= iou_threshold and v > best_iou:
                    best_iou = v
                    best_j = j
            if best_j >= 0:
                matched[best_j] = True
                bump(tp, det.cls)
            else:
                bump(fp, det.cls)
        for j, (region, cls) in enumerate(gts):
            if not matched[j]:
                bump(fn, cls)

    out = {}
    for cls in sorted(set(tp) | set(fp) | set(fn)):
        t, f_pos, f_neg = tp.get(cls, 0), fp.get(cls, 0), fn.get(cls, 0)
        defined = (t + f_pos) > 0
        out[cls] = ClassDetectionMetrics(
            tp=t, fp=f_pos, fn=f_neg,
            precision=t / (t + f_pos) if defined else 0.0,
            recall=t / (t + f_neg) if (t + f_neg) > 0 else 0.0,
            precision_defined=defined,
        )
    return out


def overall_recall(per_class: dict[str, ClassDetectionMetrics]) -> float:
    t = sum(m.tp for m in per_class.values())
    n = sum(m.tp + m.fn for m in per_class.values())
    return t / n if n else 0.0
