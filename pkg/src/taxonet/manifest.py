"""Corpus manifests: sample records and their JSON Lines form.

One sample per line with fields path, class, artifact_id, depiction,
boxes[]. Paths are POSIX-style and relative to a declared corpus root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath

from .errors import ManifestError
from .taxonomy import Taxonomy

DEPICTIONS = ("whole", "partial", "closeup", "interior")


@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int
    cls: str

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ManifestError(f"box {self} must have positive extent")
        if self.x < 0 or self.y < 0:
            raise ManifestError(f"box {self} has negative origin")

    def rect(self):
        return (self.x, self.y, self.w, self.h)

    def to_dict(self):
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "class": self.cls}

    @classmethod
    def from_dict(cls, d):
        return cls(x=int(d["x"]), y=int(d["y"]), w=int(d["w"]), h=int(d["h"]),
                   cls=str(d["class"]))


@dataclass(frozen=True)
class Sample:
    path: str  # POSIX relative path under the corpus root
    leaf_class: str
    artifact_id: str
    depiction: str = "whole"
    boxes: tuple[Box, ...] = ()

    def __post_init__(self):
        if not self.artifact_id:
            raise ManifestError(f"sample {self.path!r} has an empty artifact_id")
        if self.depiction not in DEPICTIONS:
            raise ManifestError(
                f"sample {self.path!r} has unknown depiction {self.depiction!r}"
            )
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def to_dict(self):
        return {
            "path": self.path,
            "class": self.leaf_class,
            "artifact_id": self.artifact_id,
            "depiction": self.depiction,
            "boxes": [b.to_dict() for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                path=str(d["path"]),
                leaf_class=str(d["class"]),
                artifact_id=str(d["artifact_id"]),
                depiction=str(d.get("depiction", "whole")),
                boxes=tuple(Box.from_dict(b) for b in d.get("boxes", [])),
            )
        except KeyError as e:
            raise ManifestError(f"sample record missing field {e}") from e


@dataclass
class CorpusManifest:
    samples: list[Sample] = field(default_factory=list)
    provenance: str = ""

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def class_names(self) -> list[str]:
        return sorted({s.leaf_class for s in self.samples})

    def class_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for s in self.samples:
            hist[s.leaf_class] = hist.get(s.leaf_class, 0) + 1
        return hist

    def validate_against(self, taxonomy: Taxonomy) -> None:
        for s in self.samples:
            if s.leaf_class not in taxonomy:
                raise ManifestError(
                    f"sample {s.path!r} references unknown class {s.leaf_class!r}"
                )
            for b in s.boxes:
                if b.cls not in taxonomy:
                    raise ManifestError(
                        f"box in {s.path!r} references unknown class {b.cls!r}"
                    )

    def save(self, path) -> None:
        lines = [json.dumps(s.to_dict(), sort_keys=True) for s in self.samples]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        samples = []
        for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                samples.append(Sample.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{i}: invalid JSON: {e}") from e
        return cls(samples=samples)


IMAGE_SUFFIXES = (".ppm", ".pgm")


def ingest_folder_corpus(root, metadata_name: str = "metadata.jsonl"
                         ) -> tuple[Taxonomy, CorpusManifest]:
    """Build a taxonomy plus manifest from a folder-labeled corpus.

    Directories become classes, image files attach to their containing
    directory's class. An optional ``metadata.jsonl`` at the root overrides
    artifact_id/depiction/boxes per relative path. Samples are assembled in
    path-sorted order so the result is independent of filesystem order.
    """
    root = Path(root)
    taxonomy = Taxonomy.from_folders(root)
    overrides: dict[str, dict] = {}
    meta_path = root / metadata_name
    if meta_path.is_file():
        for i, line in enumerate(meta_path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{meta_path}:{i}: invalid JSON: {e}") from e
            overrides[str(PurePosixPath(rec["path"]))] = rec

    samples = []
    files = sorted(p for p in root.rglob("*")
                   if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    for f in files:
        rel = f.relative_to(root).as_posix()
        leaf, _ = taxonomy.resolve_label(f)
        rec = overrides.get(rel, {})
        samples.append(Sample(
            path=rel,
            leaf_class=leaf,
            artifact_id=str(rec.get("artifact_id", f.stem)),
            depiction=str(rec.get("depiction", "whole")),
            boxes=tuple(Box.from_dict(b) for b in rec.get("boxes", [])),
        ))
    manifest = CorpusManifest(samples=samples, provenance=f"ingested from {root}")
    manifest.validate_against(taxonomy)
    return taxonomy, manifest


def replace_sample(sample: Sample, **kwargs) -> Sample:
    return replace(sample, **kwargs)
