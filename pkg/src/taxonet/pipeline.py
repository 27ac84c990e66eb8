"""Manifest-level orchestration: pre-train, fine-tune, evaluate.

These functions glue corpora to the training loop: load and resize
images, compute normalization stats on the training split only, train,
and package self-contained checkpoints. ``evaluate_checkpoint`` runs the
full test-side protocol including class exclusion and optional taxonomy
rollup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batches import compute_channel_stats, labels_to_indices, load_images, normalize_batch
from .checkpoint import Checkpoint, NormStats
from .errors import ValidationError
from .manifest import CorpusManifest
from .metrics import ConfusionMatrix, MetricsReport, build_report
from .network import ArchitectureConfig, ConvNet
from .taxonomy import Taxonomy
from .training import TrainConfig, TrainHistory, fit_network


def _prepare(manifest: CorpusManifest, corpus_root, input_size, stats: NormStats,
             precision) -> np.ndarray:
    c, h, w = input_size
    images = load_images(manifest, corpus_root, size_hw=(h, w))
    return normalize_batch(images, stats, precision=precision)


def _eval_arrays(test_manifest, corpus_root, input_size, stats, precision,
                 class_names):
    x = _prepare(test_manifest, corpus_root, input_size, stats, precision)
    y = labels_to_indices(test_manifest, class_names)
    return x, y


def train_classifier(train_manifest: CorpusManifest, corpus_root,
                     config: TrainConfig,
                     arch: ArchitectureConfig | None = None,
                     input_hw: tuple[int, int] = (32, 32),
                     blocks=((1, 8), (1, 16), (2, 32)), head=(64,),
                     test_manifest: CorpusManifest | None = None,
                     log=None) -> tuple[Checkpoint, TrainHistory]:
    """Train from scratch on a manifest; returns a self-contained checkpoint."""
    if not train_manifest.samples:
        raise ValidationError("training manifest is empty")
    class_names = train_manifest.class_names()
    if len(class_names) < 2:
        raise ValidationError("training manifest must cover at least two classes")
    if arch is None:
        arch = ArchitectureConfig(
            input_size=(3, input_hw[0], input_hw[1]),
            blocks=tuple(tuple(b) for b in blocks),
            head=tuple(head),
            num_classes=len(class_names),
        )
    elif arch.num_classes != len(class_names):
        raise ValidationError(
            f"architecture expects {arch.num_classes} classes, manifest has "
            f"{len(class_names)}"
        )
    arch.validate()

    c, h, w = arch.input_size
    train_images = load_images(train_manifest, corpus_root, size_hw=(h, w))
    stats = compute_channel_stats(train_images)
    x = normalize_batch(train_images, stats, precision=config.precision)
    y = labels_to_indices(train_manifest, class_names)
    eval_set = None
    if test_manifest is not None and test_manifest.samples:
        eval_set = _eval_arrays(test_manifest, corpus_root, arch.input_size,
                                stats, config.precision, class_names)

    net = ConvNet.build(arch, seed=config.seed, precision=config.precision)
    history = fit_network(net, x, y, config, eval_set=eval_set, log=log)
    net.class_names = class_names
    return Checkpoint.from_net(net, stats), history


def finetune_classifier(pretrained: Checkpoint, train_manifest: CorpusManifest,
                        corpus_root, config: TrainConfig,
                        test_manifest: CorpusManifest | None = None,
                        log=None) -> tuple[Checkpoint, TrainHistory]:
    """Fine-tune a pre-trained body on a (possibly different) class set.

    The head is re-initialized for the target classes; conv blocks can be
    frozen for the first ``config.freeze_blocks_epochs`` epochs. The result
    records the pre-training checkpoint's hash as lineage.
    """
    if not train_manifest.samples:
        raise ValidationError("training manifest is empty")
    class_names = train_manifest.class_names()
    if len(class_names) < 2:
        raise ValidationError("training manifest must cover at least two classes")
    net = pretrained.to_net(config.precision).reinit_head(
        len(class_names), seed=config.seed)
    arch = net.config

    c, h, w = arch.input_size
    train_images = load_images(train_manifest, corpus_root, size_hw=(h, w))
    stats = compute_channel_stats(train_images)
    x = normalize_batch(train_images, stats, precision=config.precision)
    y = labels_to_indices(train_manifest, class_names)
    eval_set = None
    if test_manifest is not None and test_manifest.samples:
        eval_set = _eval_arrays(test_manifest, corpus_root, arch.input_size,
                                stats, config.precision, class_names)

    history = fit_network(net, x, y, config, eval_set=eval_set, log=log)
    net.class_names = class_names
    return Checkpoint.from_net(net, stats, lineage=pretrained.sha256()), history


@dataclass
class PredictionRecord:
    path: str
    truth: str
    predicted: str
    probability: float

    def to_dict(self):
        return {"path": self.path, "truth": self.truth,
                "predicted": self.predicted, "probability": self.probability}


def predict_manifest(ckpt: Checkpoint, manifest: CorpusManifest, corpus_root,
                     precision="float32") -> list[PredictionRecord]:
    """Classify every manifest image with a checkpoint's model and stats."""
    net = ckpt.to_net(precision)
    x = _prepare(manifest, corpus_root, ckpt.arch.input_size,
                 ckpt.normalization, precision)
    probs = net.forward(x)
    pred_idx = probs.argmax(axis=1)
    return [
        PredictionRecord(
            path=s.path,
            truth=s.leaf_class,
            predicted=ckpt.class_names[int(k)],
            probability=float(probs[i, k]),
        )
        for i, (s, k) in enumerate(zip(manifest, pred_idx))
    ]


def report_from_predictions(predictions, class_names,
                            excluded_with_reasons=(), split: dict | None = None,
                            taxonomy: Taxonomy | None = None,
                            rollup_depth: int | None = None,
                            include_confusion: bool = False) -> MetricsReport:
    truths = [p.truth for p in predictions]
    preds = [p.predicted for p in predictions]
    cm = ConfusionMatrix.from_pairs(truths, preds, class_names)
    rollup_cm = None
    if rollup_depth is not None:
        if taxonomy is None:
            raise ValidationError("rollup requires a taxonomy")
        rolled_classes = sorted({taxonomy.rollup(c, rollup_depth)
                                 for c in class_names})
        rollup_cm = ConfusionMatrix.from_pairs(
            [taxonomy.rollup(t, rollup_depth) for t in truths],
            [taxonomy.rollup(p, rollup_depth) for p in preds],
            rolled_classes,
        )
    return build_report(cm, excluded_with_reasons, split=split,
                        rollup_cm=rollup_cm, rollup_depth=rollup_depth,
                        include_confusion=include_confusion)


def evaluate_checkpoint(ckpt: Checkpoint, test_manifest: CorpusManifest,
                        corpus_root, excluded_with_reasons=(),
                        split: dict | None = None,
                        taxonomy: Taxonomy | None = None,
                        rollup_depth: int | None = None,
                        precision="float32",
                        include_confusion: bool = False
                        ) -> tuple[MetricsReport, list[PredictionRecord]]:
    """Forward the test manifest and build the exclusion-aware report."""
    if not test_manifest.samples:
        raise ValidationError("test manifest is empty")
    orphans = sorted(set(m for m in (s.leaf_class for s in test_manifest))
                     - set(ckpt.class_names))
    if orphans:
        raise ValidationError(
            "test manifest classes unknown to the checkpoint: "
            + ", ".join(orphans)
        )
    predictions = predict_manifest(ckpt, test_manifest, corpus_root, precision)
    report = report_from_predictions(
        predictions, ckpt.class_names, excluded_with_reasons, split=split,
        taxonomy=taxonomy, rollup_depth=rollup_depth,
        include_confusion=include_confusion)
    return report, predictions
