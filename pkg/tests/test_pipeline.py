import numpy as np
import pytest

from taxonet.errors import ValidationError
from taxonet.pipeline import (evaluate_checkpoint, finetune_classifier,
                              predict_manifest, train_classifier)
from taxonet.splitting import stratified_split
from taxonet.synthetic import SyntheticSpec, generate_corpus
from taxonet.taxonomy import Taxonomy
from taxonet.training import TrainConfig

CLASSES = ("chair", "table", "lamp")


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    spec = SyntheticSpec(classes=CLASSES, images_per_class=12, size=24)
    manifest = generate_corpus(spec, seed=5, out_dir=root)
    return root, manifest


@pytest.fixture(scope="module")
def trained(corpus):
    root, manifest = corpus
    split = stratified_split(manifest, 0.25, seed=5)
    cfg = TrainConfig(epochs=5, batch_size=8, lr=0.01, seed=5)
    ckpt, history = train_classifier(split.train, root, cfg, input_hw=(24, 24))
    return root, split, ckpt, history


class TestTrainClassifier:
    def test_checkpoint_is_self_contained(self, trained):
        root, split, ckpt, history = trained
        assert ckpt.class_names == sorted(CLASSES)
        assert len(history) == 5
        assert all(s > 0 for s in ckpt.normalization.std)

    def test_arch_class_count_must_match(self, corpus):
        from taxonet.network import ArchitectureConfig

        root, manifest = corpus
        arch = ArchitectureConfig(input_size=(3, 24, 24), blocks=((1, 4),),
                                  head=(8,), num_classes=7)
        with pytest.raises(ValidationError, match="classes"):
            train_classifier(manifest, root, TrainConfig(epochs=1), arch=arch)

    def test_empty_manifest_rejected(self, corpus):
        from taxonet.manifest import CorpusManifest

        root, _ = corpus
        with pytest.raises(ValidationError, match="empty"):
            train_classifier(CorpusManifest(), root, TrainConfig(epochs=1))


class TestEvaluate:
    def test_report_and_predictions(self, trained):
        root, split, ckpt, _ = trained
        report, predictions = evaluate_checkpoint(ckpt, split.test, root)
        assert len(predictions) == len(split.test)
        assert 0.0 <= report.mean_class_accuracy <= 1.0
        for p in predictions:
            assert p.predicted in ckpt.class_names
            assert 0.0 <= p.probability <= 1.0

    def test_report_reproducible_from_predictions_file(self, trained):
        """Brute-force recomputation over the persisted predictions."""
        root, split, ckpt, _ = trained
        report, predictions = evaluate_checkpoint(ckpt, split.test, root)
        per_class = {}
        for p in predictions:
            t = per_class.setdefault(p.truth, [0, 0])
            t[1] += 1
            if p.predicted == p.truth:
                t[0] += 1
        expected_mca = sum(c / n for c, n in per_class.values()) / len(per_class)
        assert report.mean_class_accuracy == pytest.approx(expected_mca, abs=1e-12)
        expected_overall = (sum(c for c, _ in per_class.values())
                            / len(predictions))
        assert report.overall_accuracy == pytest.approx(expected_overall, abs=1e-12)

    def test_order_independence(self, trained):
        from taxonet.manifest import CorpusManifest

        root, split, ckpt, _ = trained
        report1, _ = evaluate_checkpoint(ckpt, split.test, root)
        reversed_manifest = CorpusManifest(samples=list(split.test)[::-1])
        report2, _ = evaluate_checkpoint(ckpt, reversed_manifest, root)
        assert report1.to_dict() == report2.to_dict()

    def test_orphan_classes_rejected(self, trained, tmp_path):
        from taxonet.manifest import CorpusManifest, Sample
        from taxonet.ppm import ImageRecord, write_ppm

        root, split, ckpt, _ = trained
        write_ppm(tmp_path / "x.ppm",
                  ImageRecord(4, 4, np.zeros((4, 4, 3), dtype=np.uint8)))
        other = CorpusManifest(samples=[
            Sample(path="x.ppm", leaf_class="spaceship", artifact_id="a")])
        with pytest.raises(ValidationError, match="spaceship"):
            evaluate_checkpoint(ckpt, other, tmp_path)

    def test_excluded_classes_listed_and_out_of_means(self, trained):
        root, split, ckpt, _ = trained
        report, _ = evaluate_checkpoint(
            ckpt, split.test, root,
            excluded_with_reasons=[("lamp", "single_image")])
        assert {"class": "lamp", "reason": "single_image"} in report.excluded_classes
        assert "lamp" not in report.per_class

    def test_rollup_collapses_sibling_confusions(self, tmp_path):
        """All confusions stay within one parent: leaf accuracy < 1 but
        rolled-up accuracy = 1."""
        from taxonet.pipeline import PredictionRecord, report_from_predictions

        tax = Taxonomy()
        parent = tax.add_class("Chest of drawers")
        a = tax.add_class("Semainier", parent)
        b = tax.add_class("Wellington chest", parent)
        other = tax.add_class("Chairs")
        predictions = [
            PredictionRecord("p1", a, b, 0.9),   # sibling confusion
            PredictionRecord("p2", b, a, 0.8),   # sibling confusion
            PredictionRecord("p3", other, other, 0.95),
        ]
        report = report_from_predictions(predictions, [a, b, other],
                                         taxonomy=tax, rollup_depth=0)
        assert report.overall_accuracy == pytest.approx(1 / 3)
        assert report.rollup["overall_accuracy"] == 1.0
        assert report.rollup["mean_class_accuracy"] == 1.0


class TestFinetune:
    def test_full_freeze_preserves_conv_weights(self, trained, tmp_path):
        root, split, ckpt, _ = trained
        spec = SyntheticSpec(classes=("mirror", "clock"), images_per_class=6,
                             size=24)
        target_root = tmp_path / "target"
        target = generate_corpus(spec, seed=9, out_dir=target_root)
        cfg = TrainConfig(epochs=2, lr=0.05, seed=1, freeze_blocks_epochs=2)
        ft_ckpt, _ = finetune_classifier(ckpt, target, target_root, cfg)
        pre_net = ckpt.to_net()
        ft_net = ft_ckpt.to_net()
        for p in pre_net.params:
            if p.name.startswith("block"):
                assert np.array_equal(ft_net.param(p.name).value, p.value)
        assert ft_ckpt.lineage == ckpt.sha256()

    def test_lr_zero_matches_head_reinit(self, trained):
        root, split, ckpt, _ = trained
        cfg = TrainConfig(epochs=1, lr=0.0, seed=3)
        ft_ckpt, _ = finetune_classifier(ckpt, split.train, root, cfg)
        reinit = ckpt.to_net().reinit_head(len(split.train.class_names()), seed=3)
        ft_net = ft_ckpt.to_net()
        for p in reinit.params:
            assert np.array_equal(ft_net.param(p.name).value,
                                  p.value.astype(np.float32))

    def test_predictions_consistent_with_manifest(self, trained):
        root, split, ckpt, _ = trained
        predictions = predict_manifest(ckpt, split.test, root)
        assert [p.path for p in predictions] == [s.path for s in split.test]
