"""Deterministic per-class train/test splitting with non-computable classes.

A class whose samples cannot cover both sides (a single image, or a single
artifact group) goes entirely to the train side and is reported
non-computable, so evaluation can exclude it from class means. With
artifact grouping on, every sample of one artifact_id lands on the same
side, globally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ManifestError
from .manifest import CorpusManifest, Sample
from .rng import derive_seed


@dataclass(frozen=True)
class SplitDescriptor:
    test_ratio: float
    seed: int
    group_by_artifact: bool

    def to_dict(self):
        return {"test_ratio": self.test_ratio, "seed": self.seed,
                "group_by_artifact": self.group_by_artifact}


@dataclass
class SplitResult:
    train: CorpusManifest
    test: CorpusManifest
    non_computable: list[tuple[str, str]]  # (class, reason)
    descriptor: SplitDescriptor


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _test_count(n: int, ratio: float) -> int:
    # both sides stay non-empty for n >= 2
    return min(max(1, _round_half_up(ratio * n)), n - 1)


def _split_ungrouped(by_class, test_ratio, seed, test_ids, non_computable):
    for ci, cls in enumerate(sorted(by_class)):
        samples = by_class[cls]
        n = len(samples)
        if n == 1:
            non_computable.append((cls, "single_image"))
            continue
        rng = np.random.default_rng(derive_seed(seed, ci))
        order = rng.permutation(n)
        for k in order[: _test_count(n, test_ratio)]:
            test_ids.add(id(samples[k]))


def _split_grouped(by_class, test_ratio, seed, test_ids, non_computable):
    artifact_side: dict[str, str] = {}
    artifact_classes: dict[str, set[str]] = {}
    for cls, samples in by_class.items():
        for s in samples:
            artifact_classes.setdefault(s.artifact_id, set()).add(cls)

    for ci, cls in enumerate(sorted(by_class)):
        samples = by_class[cls]
        n = len(samples)
        if n == 1:
            non_computable.append((cls, "single_image"))
            artifact_side.setdefault(samples[0].artifact_id, "train")
            continue
        groups: dict[str, int] = {}
        for s in samples:
            groups[s.artifact_id] = groups.get(s.artifact_id, 0) + 1
        names = sorted(groups)
        rng = np.random.default_rng(derive_seed(seed, ci))
        want_test = _test_count(n, test_ratio)
        test_n = sum(groups[a] for a in names if artifact_side.get(a) == "test")
        for k in rng.permutation(len(names)):
            a = names[k]
            if a in artifact_side:
                continue
            if test_n < want_test and test_n + groups[a] < n:
                artifact_side[a] = "test"
                test_n += groups[a]
            else:
                artifact_side[a] = "train"

    # classes left with an empty side are non-computable; their exclusively
    # owned artifacts fall back to the train side
    for cls in sorted(by_class):
        samples = by_class[cls]
        if len(samples) == 1:
            continue  # already reported
        names = {s.artifact_id for s in samples}
        test_n = sum(1 for s in samples if artifact_side[s.artifact_id] == "test")
        if test_n == len(samples) or test_n == 0:
            reason = "single_artifact" if len(names) == 1 else "artifact_grouping"
            non_computable.append((cls, reason))
            for a in names:
                if artifact_classes[a] == {cls}:
                    artifact_side[a] = "train"

    for samples in by_class.values():
        for s in samples:
            if artifact_side[s.artifact_id] == "test":
                test_ids.add(id(s))


def stratified_split(manifest: CorpusManifest, test_ratio: float, seed: int,
                     group_by_artifact: bool = True) -> SplitResult:
    if not manifest.samples:
        raise ManifestError("cannot split an empty manifest")
    if not 0 < test_ratio < 1:
        raise ManifestError(f"test_ratio must lie in (0, 1), got {test_ratio}")

    by_class: dict[str, list[Sample]] = {}
    for s in manifest:
        by_class.setdefault(s.leaf_class, []).append(s)

    test_ids: set[int] = set()
    non_computable: list[tuple[str, str]] = []
    if group_by_artifact:
        _split_grouped(by_class, test_ratio, seed, test_ids, non_computable)
    else:
        _split_ungrouped(by_class, test_ratio, seed, test_ids, non_computable)

    train = [s for s in manifest if id(s) not in test_ids]
    test = [s for s in manifest if id(s) in test_ids]
    return SplitResult(
        train=CorpusManifest(samples=train, provenance=manifest.provenance),
        test=CorpusManifest(samples=test, provenance=manifest.provenance),
        non_computable=sorted(non_computable),
        descriptor=SplitDescriptor(test_ratio=test_ratio, seed=seed,
                                   group_by_artifact=group_by_artifact),
    )
