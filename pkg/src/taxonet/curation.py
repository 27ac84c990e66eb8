"""Corpus curation: split multi-object images, mask neighbors, drop
partial/closeup/interior depictions.

Curation keeps whole-artifact images, expands box-annotated images into one
single-object crop per box (masking any overlapping neighbor with a solid
fill), and excludes everything else with a reason code. Duplicate images
listed under different artifact ids are kept. Curating an already-curated
corpus is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from .errors import ManifestError
from .imageops import crop, mask_region, rects_intersection
from .manifest import CorpusManifest, Sample
from .ppm import ImageRecord, read_ppm, write_ppm

DEFAULT_FILL = (128, 128, 128)


@dataclass(frozen=True)
class CurationRules:
    fill_color: tuple[int, int, int] = DEFAULT_FILL

    def __post_init__(self):
        fill = tuple(int(v) for v in self.fill_color)
        if len(fill) != 3 or any(not 0 <= v <= 255 for v in fill):
            raise ManifestError(f"fill color must be an RGB triple, got {self.fill_color!r}")
        object.__setattr__(self, "fill_color", fill)


@dataclass(frozen=True)
class Exclusion:
    path: str
    leaf_class: str
    reason: str

    def to_dict(self):
        return {"path": self.path, "class": self.leaf_class, "reason": self.reason}


def split_by_boxes(sample: Sample, image: ImageRecord,
                   fill_color=DEFAULT_FILL) -> list[tuple[Sample, ImageRecord]]:
    """One single-object crop per box; overlapping neighbor boxes are masked.

    The caller decides where crop files land; returned sample paths carry an
    ``_objN`` suffix next to the source path. Output depictions are always
    ``whole`` and each crop's class is its box's class.
    """
    if not sample.boxes:
        raise ManifestError(
            f"sample {sample.path!r} has no boxes; pass it through unchanged"
        )
    for b in sample.boxes:
        if b.x + b.w > image.width or b.y + b.h > image.height:
            raise ManifestError(f"box {b} exceeds image bounds in {sample.path!r}")
    src = PurePosixPath(sample.path)
    out = []
    for i, box in enumerate(sample.boxes):
        piece = crop(image, box.rect())
        for j, other in enumerate(sample.boxes):
            if j == i:
                continue
            inter = rects_intersection(box.rect(), other.rect())
            if inter is None:
                continue
            local = (inter[0] - box.x, inter[1] - box.y, inter[2], inter[3])
            piece = mask_region(piece, local, fill_color)
        new_sample = Sample(
            path=str(src.with_name(f"{src.stem}_obj{i}{src.suffix}")),
            leaf_class=box.cls,
            artifact_id=f"{sample.artifact_id}/obj{i}",
            depiction="whole",
            boxes=(),
        )
        out.append((new_sample, piece))
    return out


def curate(manifest: CorpusManifest, corpus_root, output_dir,
           rules: CurationRules = CurationRules()
           ) -> tuple[CorpusManifest, list[Exclusion]]:
    """Apply the curation rules, writing a self-contained corpus to
    ``output_dir``. Returns the kept manifest (paths relative to
    ``output_dir``) and the exclusions with reason codes."""
    corpus_root = Path(corpus_root)
    output_dir = Path(output_dir)
    kept: list[Sample] = []
    excluded: list[Exclusion] = []

    def emit(sample: Sample, data: bytes | None = None, image: ImageRecord | None = None):
        dest = output_dir / sample.path
        dest.parent.mkdir(parents=True, exist_ok=True)
        if image is not None:
            write_ppm(dest, image)
        else:
            dest.write_bytes(data)
        kept.append(sample)

    for sample in manifest:
        src = corpus_root / sample.path
        if sample.boxes:
            image = read_ppm(src)
            for new_sample, piece in split_by_boxes(sample, image, rules.fill_color):
                emit(new_sample, image=piece)
        elif sample.depiction == "whole":
            emit(sample, data=src.read_bytes())
        else:
            excluded.append(Exclusion(sample.path, sample.leaf_class, sample.depiction))

    provenance = f"curated from {manifest.provenance}" if manifest.provenance else "curated"
    return CorpusManifest(samples=kept, provenance=provenance), excluded
