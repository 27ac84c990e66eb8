import numpy as np
import pytest

from taxonet.errors import TrainingDivergedError, ValidationError
from taxonet.network import ArchitectureConfig, ConvNet
from taxonet.training import (EpochRecord, TrainConfig, TrainHistory,
                              fit_network, mean_class_accuracy_indices)

TINY = ArchitectureConfig(input_size=(3, 8, 8), blocks=((1, 4),), head=(8,),
                          num_classes=2)


def separable_data(n_per_class=20, seed=0):
    """Two classes split by overall brightness; linearly separable."""
    rng = np.random.default_rng(seed)
    bright = rng.normal(1.5, 0.2, size=(n_per_class, 3, 8, 8))
    dark = rng.normal(-1.5, 0.2, size=(n_per_class, 3, 8, 8))
    x = np.concatenate([bright, dark]).astype(np.float32)
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return x, y


def snapshot(net):
    return [p.value.copy() for p in net.params]


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=0).validate()
        with pytest.raises(ValidationError):
            TrainConfig(lr_decay=0.0).validate()
        with pytest.raises(ValidationError):
            TrainConfig(momentum=1.0).validate()
        TrainConfig(lr=0.0).validate()  # lr 0 is a legal fixed point

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValidationError, match="unknown"):
            TrainConfig.from_dict({"epochs": 2, "learning_rate": 0.1})


class TestFitNetwork:
    def test_separable_reaches_full_accuracy(self):
        net = ConvNet.build(TINY, seed=0)
        x, y = separable_data()
        cfg = TrainConfig(epochs=10, batch_size=8, lr=0.01, seed=0)
        history = fit_network(net, x, y, cfg)
        assert history.final().train_accuracy == 1.0

    def test_lr_zero_is_fixed_point(self):
        net = ConvNet.build(TINY, seed=0)
        before = snapshot(net)
        x, y = separable_data(8)
        history = fit_network(net, x, y, TrainConfig(epochs=1, lr=0.0, seed=0))
        for prev, p in zip(before, net.params):
            assert np.array_equal(prev, p.value)
        assert history.final().train_loss == pytest.approx(np.log(2), abs=0.05)

    def test_seeded_determinism(self):
        x, y = separable_data(10)
        cfg = TrainConfig(epochs=3, batch_size=4, lr=0.01, seed=5)
        h1 = fit_network(ConvNet.build(TINY, seed=1), x, y, cfg)
        h2 = fit_network(ConvNet.build(TINY, seed=1), x, y, cfg)
        assert h1.records == h2.records

    def test_checkpoint_bytes_deterministic(self):
        from taxonet.checkpoint import Checkpoint, NormStats

        x, y = separable_data(10)
        cfg = TrainConfig(epochs=2, batch_size=4, lr=0.01, seed=5)
        stats = NormStats((0.5,) * 3, (0.25,) * 3)
        blobs = []
        for _ in range(2):
            net = ConvNet.build(TINY, seed=1)
            fit_network(net, x, y, cfg)
            net.class_names = ["dark", "bright"]
            blobs.append(Checkpoint.from_net(net, stats).to_bytes())
        assert blobs[0] == blobs[1]

    def test_loss_non_increasing_small_lr_repeated_batch(self):
        # smoke property: single repeated batch on the default desk config,
        # lr 1e-3, loss non-increasing over the first 5 epochs
        arch = ArchitectureConfig()  # 3x64x64, blocks (1,8),(1,16),(2,32)
        net = ConvNet.build(arch, seed=2)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(6, 3, 64, 64)).astype(np.float32)
        y = np.array([0, 1, 2, 3, 4, 0])
        cfg = TrainConfig(epochs=5, batch_size=6, lr=1e-3, momentum=0.0, seed=0,
                          lr_decay=1.0)
        history = fit_network(net, x, y, cfg)
        losses = [r.train_loss for r in history.records]
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_abort_on_divergence(self):
        net = ConvNet.build(TINY, seed=0)
        net.param("output.weight").value[...] = 1e30  # guarantee overflow
        net.param("head1.weight").value[...] = 1e30
        x, y = separable_data(4)
        with pytest.raises((TrainingDivergedError, ValidationError)) as exc:
            fit_network(net, x, y, TrainConfig(epochs=2, lr=10.0, seed=0))
        if isinstance(exc.value, TrainingDivergedError):
            assert exc.value.epoch == 0

    def test_freezing_preserves_blocks_bit_exact(self):
        net = ConvNet.build(TINY, seed=0)
        frozen_before = {p.name: p.value.copy() for p in net.params
                         if p.name.startswith("block")}
        x, y = separable_data(10)
        cfg = TrainConfig(epochs=3, lr=0.05, seed=0, freeze_blocks_epochs=3)
        fit_network(net, x, y, cfg)
        for name, value in frozen_before.items():
            assert np.array_equal(net.param(name).value, value)
        # head must have moved
        assert not np.array_equal(net.param("output.weight").value,
                                  ConvNet.build(TINY, seed=0).param("output.weight").value)

    def test_partial_freeze_then_train(self):
        net = ConvNet.build(TINY, seed=0)
        frozen_before = {p.name: p.value.copy() for p in net.params
                         if p.name.startswith("block")}
        x, y = separable_data(10)
        cfg = TrainConfig(epochs=4, lr=0.05, seed=0, freeze_blocks_epochs=2)
        fit_network(net, x, y, cfg)
        changed = any(not np.array_equal(net.param(n).value, v)
                      for n, v in frozen_before.items())
        assert changed  # unfrozen after epoch 2

    def test_eval_set_recorded(self):
        net = ConvNet.build(TINY, seed=0)
        x, y = separable_data(10)
        cfg = TrainConfig(epochs=2, lr=0.01, seed=0)
        history = fit_network(net, x, y, cfg, eval_set=(x, y))
        assert all(r.test_mean_class_accuracy is not None
                   for r in history.records)

    def test_patience_stops_early(self):
        net = ConvNet.build(TINY, seed=0)
        x, y = separable_data(10)
        cfg = TrainConfig(epochs=50, lr=0.0, seed=0, patience=2)
        history = fit_network(net, x, y, cfg, eval_set=(x, y))
        assert len(history) < 50


class TestHistory:
    def test_csv_round_trip(self, tmp_path):
        h = TrainHistory(records=[
            EpochRecord(0, 1.5, 0.25, None),
            EpochRecord(1, 0.75, 0.5, 0.625),
        ])
        path = tmp_path / "h.csv"
        h.to_csv(path)
        assert TrainHistory.from_csv(path).records == h.records
        header = path.read_text().splitlines()[0]
        assert header == "epoch,train_loss,train_acc,test_mean_class_acc"


class TestMcaIndices:
    def test_matches_definition(self):
        y_true = np.array([0, 0, 1, 2])
        y_pred = np.array([0, 1, 1, 0])
        # class recalls: 0 -> 1/2, 1 -> 1, 2 -> 0
        assert mean_class_accuracy_indices(y_true, y_pred, 3) == pytest.approx(0.5)

    def test_absent_class_ignored(self):
        y_true = np.array([0, 0])
        y_pred = np.array([0, 0])
        assert mean_class_accuracy_indices(y_true, y_pred, 5) == 1.0
