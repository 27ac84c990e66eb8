"""Seeded synthetic glyph corpora.

Line-drawing stand-ins for furniture photographs: eight glyph classes with
jittered placement, scale, stroke and background color, optional noise,
plus a cluttered variant that renders multi-object scenes with
ground-truth boxes so curation and detection can be exercised end to end.
Byte-identical output for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .manifest import Box, CorpusManifest, Sample
from .ppm import ImageRecord, write_ppm
from .rng import derive_seed
from .taxonomy import Taxonomy


# -- ink-canvas drawing primitives (unit coordinates, y down) ----------------


def _px(v: float, s: int) -> int:
    return int(np.floor(v * s + 0.5))


def _rect(ink, box, ux, uy, uw, uh):
    x0, y0, s = box
    x = x0 + _px(ux, s)
    y = y0 + _px(uy, s)
    w = max(1, _px(uw, s))
    h = max(1, _px(uh, s))
    ink[y : y + h, x : x + w] = 1.0


def _frame(ink, box, ux, uy, uw, uh, t):
    _rect(ink, box, ux, uy, uw, t)
    _rect(ink, box, ux, uy + uh - t, uw, t)
    _rect(ink, box, ux, uy, t, uh)
    _rect(ink, box, ux + uw - t, uy, t, uh)


def _disk(ink, box, ucx, ucy, ur):
    x0, y0, s = box
    cx = x0 + ucx * s
    cy = y0 + ucy * s
    r = max(1.0, ur * s)
    yy, xx = np.ogrid[: ink.shape[0], : ink.shape[1]]
    ink[(xx - cx) ** 2 + (yy - cy) ** 2 <= r**2] = 1.0


def _ring(ink, box, ucx, ucy, ur_out, ur_in):
    x0, y0, s = box
    cx = x0 + ucx * s
    cy = y0 + ucy * s
    r_out = max(2.0, ur_out * s)
    r_in = min(r_out - 1.0, ur_in * s)
    yy, xx = np.ogrid[: ink.shape[0], : ink.shape[1]]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    ink[(d2 <= r_out**2) & (d2 >= r_in**2)] = 1.0


def _draw_chair(ink, box, rng):
    _rect(ink, box, 0.15, 0.05, 0.13, 0.62)
    _rect(ink, box, 0.15, 0.52, 0.66, 0.13)
    _rect(ink, box, 0.17, 0.65, 0.11, 0.30)
    _rect(ink, box, 0.68, 0.65, 0.11, 0.30)


def _draw_table(ink, box, rng):
    _rect(ink, box, 0.05, 0.24, 0.90, 0.13)
    _rect(ink, box, 0.11, 0.37, 0.11, 0.56)
    _rect(ink, box, 0.78, 0.37, 0.11, 0.56)


def _draw_cabinet(ink, box, rng):
    _frame(ink, box, 0.12, 0.06, 0.76, 0.88, 0.08)
    _rect(ink, box, 0.12, 0.46, 0.76, 0.08)
    _disk(ink, box, 0.42, 0.30, 0.055)
    _disk(ink, box, 0.58, 0.72, 0.055)


def _draw_bed(ink, box, rng):
    _rect(ink, box, 0.05, 0.12, 0.11, 0.62)
    _rect(ink, box, 0.05, 0.52, 0.90, 0.24)
    _rect(ink, box, 0.86, 0.36, 0.09, 0.40)


def _draw_lamp(ink, box, rng):
    for k in range(5):
        w = 0.18 + k * 0.10
        _rect(ink, box, 0.5 - w / 2, 0.06 + k * 0.055, w, 0.055)
    _rect(ink, box, 0.46, 0.33, 0.08, 0.50)
    _rect(ink, box, 0.28, 0.83, 0.44, 0.10)


def _draw_mirror(ink, box, rng):
    _ring(ink, box, 0.50, 0.36, 0.30, 0.21)
    _rect(ink, box, 0.46, 0.64, 0.08, 0.22)
    _rect(ink, box, 0.30, 0.85, 0.40, 0.08)


def _draw_sofa(ink, box, rng):
    _rect(ink, box, 0.10, 0.28, 0.80, 0.18)
    _rect(ink, box, 0.10, 0.46, 0.80, 0.24)
    _rect(ink, box, 0.03, 0.34, 0.11, 0.45)
    _rect(ink, box, 0.86, 0.34, 0.11, 0.45)


def _draw_clock(ink, box, rng):
    _frame(ink, box, 0.30, 0.04, 0.40, 0.92, 0.07)
    _ring(ink, box, 0.50, 0.26, 0.15, 0.08)
    _rect(ink, box, 0.47, 0.48, 0.06, 0.32)
    _disk(ink, box, 0.50, 0.82, 0.07)


GLYPHS = {
    "chair": _draw_chair,
    "table": _draw_table,
    "cabinet": _draw_cabinet,
    "bed": _draw_bed,
    "lamp": _draw_lamp,
    "mirror": _draw_mirror,
    "sofa": _draw_sofa,
    "clock": _draw_clock,
}


# -- corpus specs -------------------------------------------------------------


@dataclass(frozen=True)
class ClutterSpec:
    objects_per_scene: int = 2
    scene_size: int = 64
    object_size: int = 28
    distractor_strokes: int = 2
    noise: float = 4.0

    def validate(self):
        if self.objects_per_scene < 1:
            raise ValidationError("objects_per_scene must be >= 1")
        grid = int(np.ceil(np.sqrt(self.objects_per_scene)))
        if self.object_size * grid > self.scene_size:
            raise ValidationError(
                f"{self.objects_per_scene} objects of size {self.object_size} "
                f"do not fit a {self.scene_size}px scene"
            )
        return self


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[str, ...] = ("chair", "table", "cabinet", "bed", "lamp")
    images_per_class: int = 200
    size: int = 32
    noise: float = 4.0
    clutter: ClutterSpec | None = None

    def validate(self):
        unknown = sorted(set(self.classes) - set(GLYPHS))
        if unknown:
            raise ValidationError(
                f"unknown glyph classes {unknown}; available: {sorted(GLYPHS)}"
            )
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("duplicate glyph classes")
        if self.images_per_class < 1:
            raise ValidationError("images_per_class must be >= 1")
        if self.size < 16:
            raise ValidationError("glyph canvas below 16px is unreadable")
        if self.clutter is not None:
            self.clutter.validate()
            if self.clutter.objects_per_scene > 1 and len(self.classes) < 2:
                raise ValidationError(
                    "multi-object scenes need at least two glyph classes"
                )
        return self

    def to_dict(self):
        d = {
            "classes": list(self.classes),
            "images_per_class": self.images_per_class,
            "size": self.size,
            "noise": self.noise,
        }
        if self.clutter is not None:
            d["clutter"] = {
                "objects_per_scene": self.clutter.objects_per_scene,
                "scene_size": self.clutter.scene_size,
                "object_size": self.clutter.object_size,
                "distractor_strokes": self.clutter.distractor_strokes,
                "noise": self.clutter.noise,
            }
        return d

    @classmethod
    def from_dict(cls, d):
        clutter = d.get("clutter")
        return cls(
            classes=tuple(d.get("classes", cls.classes)),
            images_per_class=int(d.get("images_per_class", 200)),
            size=int(d.get("size", 32)),
            noise=float(d.get("noise", 4.0)),
            clutter=ClutterSpec(**clutter) if clutter else None,
        ).validate()


def build_taxonomy(classes) -> Taxonomy:
    tax = Taxonomy()
    for cls in classes:
        tax.add_class(cls)
    return tax


# -- rendering ----------------------------------------------------------------


def _tight_bbox(ink) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(ink)
    return (int(xs.min()), int(ys.min()),
            int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def _place_glyph(ink, cls, region, rng):
    """Draw ``cls`` jittered inside region=(x, y, side); return its tight box."""
    x, y, side = region
    s = max(12, int(side * rng.uniform(0.72, 0.92)))
    x0 = x + int(rng.integers(0, side - s + 1))
    y0 = y + int(rng.integers(0, side - s + 1))
    before = ink.copy()
    GLYPHS[cls](ink, (x0, y0, s), rng)
    return _tight_bbox(np.clip(ink - before, 0, 1))


def _composite(ink, rng, noise, stroke=None, background=None):
    h, w = ink.shape
    if background is None:
        background = rng.uniform(160, 235, size=3)
    if stroke is None:
        stroke = rng.uniform(0, 70, size=3)
    img = background * (1.0 - ink[..., None]) + stroke * ink[..., None]
    if noise > 0:
        img = img + rng.normal(0.0, noise, size=img.shape)
    return ImageRecord.from_array(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))


def render_glyph_image(cls, size, rng, noise=4.0):
    """A single jittered glyph on a clean background; returns (image, tight box)."""
    ink = np.zeros((size, size))
    bbox = _place_glyph(ink, cls, (0, 0, size), rng)
    return _composite(ink, rng, noise), bbox


def _add_distractor_strokes(ink, count, forbidden, rng):
    h, w = ink.shape
    for _ in range(count):
        for _attempt in range(20):
            horizontal = bool(rng.integers(0, 2))
            length = int(rng.integers(w // 4, w // 2))
            x = int(rng.integers(0, w - length)) if horizontal else int(rng.integers(0, w - 1))
            y = int(rng.integers(0, h - 1)) if horizontal else int(rng.integers(0, h - length))
            rect = (x, y, length, 1) if horizontal else (x, y, 1, length)
            if not any(_overlaps(rect, f) for f in forbidden):
                rx, ry, rw, rh = rect
                ink[ry : ry + rh, rx : rx + rw] = 1.0
                break


def _overlaps(a, b):
    return not (a[0] + a[2] <= b[0] or b[0] + b[2] <= a[0]
                or a[1] + a[3] <= b[1] or b[1] + b[3] <= a[1])


def render_scene(primary_cls, other_classes, clutter: ClutterSpec, rng):
    """Multi-object scene; the primary glyph is placed first. Returns
    (image, boxes) with one tight ground-truth box per object."""
    size = clutter.scene_size
    ink = np.zeros((size, size))
    grid = int(np.ceil(np.sqrt(clutter.objects_per_scene)))
    cell = size // grid
    cells = rng.permutation(grid * grid)[: clutter.objects_per_scene]
    boxes = []
    for cls, cell_ix in zip([primary_cls, *other_classes], cells):
        cx = (int(cell_ix) % grid) * cell
        cy = (int(cell_ix) // grid) * cell
        pad = max(0, (cell - clutter.object_size) // 2)
        region = (cx + pad, cy + pad, clutter.object_size)
        bbox = _place_glyph(ink, cls, region, rng)
        boxes.append(Box(x=bbox[0], y=bbox[1], w=bbox[2], h=bbox[3], cls=cls))
    _add_distractor_strokes(ink, clutter.distractor_strokes,
                            [b.rect() for b in boxes], rng)
    return _composite(ink, rng, clutter.noise), boxes


# -- corpus generation ---------------------------------------------------------


def generate_corpus(spec: SyntheticSpec, seed: int, out_dir) -> CorpusManifest:
    """Write a deterministic glyph corpus under ``out_dir`` and return its
    manifest (paths relative to ``out_dir``)."""
    spec.validate()
    out = Path(out_dir)
    samples = []
    if spec.clutter is None:
        for ci, cls in enumerate(spec.classes):
            (out / cls).mkdir(parents=True, exist_ok=True)
            for i in range(spec.images_per_class):
                rng = np.random.default_rng(derive_seed(seed, ci, i))
                image, _ = render_glyph_image(cls, spec.size, rng, spec.noise)
                rel = f"{cls}/{cls}_{i:04d}.ppm"
                write_ppm(out / rel, image)
                samples.append(Sample(path=rel, leaf_class=cls,
                                      artifact_id=f"{cls}_{i:04d}"))
    else:
        (out / "scenes").mkdir(parents=True, exist_ok=True)
        others = list(spec.classes)
        for ci, cls in enumerate(spec.classes):
            for i in range(spec.images_per_class):
                rng = np.random.default_rng(derive_seed(seed, ci, i))
                pool = [c for c in others if c != cls]
                extra = [pool[int(k)] for k in
                         rng.integers(0, len(pool),
                                      size=spec.clutter.objects_per_scene - 1)]
                image, boxes = render_scene(cls, extra, spec.clutter, rng)
                rel = f"scenes/{cls}_{i:04d}.ppm"
                write_ppm(out / rel, image)
                samples.append(Sample(path=rel, leaf_class=cls,
                                      artifact_id=f"scene_{cls}_{i:04d}",
                                      boxes=tuple(boxes)))
    samples.sort(key=lambda s: s.path)
    return CorpusManifest(samples=samples,
                          provenance=f"synthetic corpus, seed {seed}")
