"""scikit-learn style wrapper around the convolutional classifier.

``ConvNetClassifier`` trains on arrays shaped (N, C, H, W) with arbitrary
hashable labels, exposes ``fit`` / ``predict`` / ``predict_proba`` /
``score`` and composes with sklearn tooling (``get_params``, ``clone``,
pipelines). A fitted body (or checkpoint) can be passed as ``init_body``
to fine-tune: the output head is re-initialized for the new class set.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .checkpoint import Checkpoint
from .errors import ValidationError
from .network import ArchitectureConfig, ConvNet
from .training import TrainConfig, TrainHistory, fit_network
from .validation import check_image_batch


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    def __init__(self, blocks=((1, 8), (1, 16), (2, 32)), head=(64,),
                 epochs=10, batch_size=32, lr=0.01, momentum=0.9,
                 lr_decay=0.95, seed=0, freeze_blocks_epochs=0,
                 precision="float32", patience=None, init_body=None):
        self.blocks = blocks
        self.head = head
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.lr_decay = lr_decay
        self.seed = seed
        self.freeze_blocks_epochs = freeze_blocks_epochs
        self.precision = precision
        self.patience = patience
        self.init_body = init_body

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
            momentum=self.momentum, seed=self.seed,
            freeze_blocks_epochs=self.freeze_blocks_epochs,
            lr_decay=self.lr_decay, precision=self.precision,
            patience=self.patience,
        ).validate()

    def _build_net(self, input_size, num_classes) -> ConvNet:
        body = self.init_body
        if body is None:
            arch = ArchitectureConfig(
                input_size=input_size,
                blocks=tuple(tuple(b) for b in self.blocks),
                head=tuple(self.head),
                num_classes=num_classes,
            ).validate()
            return ConvNet.build(arch, seed=self.seed, precision=self.precision)
        if isinstance(body, Checkpoint):
            body = body.to_net(self.precision)
        if not isinstance(body, ConvNet):
            raise ValidationError(
                "init_body must be a ConvNet or Checkpoint, got "
                f"{type(body).__name__}"
            )
        if tuple(body.config.input_size) != tuple(input_size):
            raise ValidationError(
                f"init_body expects input {body.config.input_size}, data is "
                f"{tuple(input_size)}"
            )
        net = body.astype(self.precision)
        return net.reinit_head(num_classes, seed=self.seed)

    def fit(self, X, y, eval_set=None):
        """Train on images X (N, C, H, W) and labels y.

        ``eval_set=(X_test, y_test)`` adds per-epoch test mean-class
        accuracy to ``history_``.
        """
        config = self._train_config()
        X = check_image_batch(X, dtype=config.precision)
        y = np.asarray(y)
        if y.shape != (len(X),):
            raise ValidationError(f"y must have shape ({len(X)},), got {y.shape}")
        classes, y_idx = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise ValidationError("need at least two classes to fit")
        self.classes_ = classes
        net = self._build_net(tuple(X.shape[1:]), len(classes))

        eval_arrays = None
        if eval_set is not None:
            X_test = check_image_batch(eval_set[0], dtype=config.precision)
            lookup = {c: i for i, c in enumerate(classes)}
            try:
                y_test = np.array([lookup[v] for v in np.asarray(eval_set[1])],
                                  dtype=np.int64)
            except KeyError as e:
                raise ValidationError(f"eval_set label {e.args[0]!r} not seen in y")
            eval_arrays = (X_test, y_test)

        self.history_ = fit_network(net, X, y_idx, config, eval_set=eval_arrays)
        net.class_names = [str(c) for c in classes]
        self.net_ = net
        self.input_shape_ = tuple(X.shape[1:])
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise ValidationError("this ConvNetClassifier instance is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_image_batch(X, input_size=self.input_shape_,
                              dtype=self.precision)
        return self.net_.forward(X)

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_image_batch(X, input_size=self.input_shape_,
                              dtype=self.precision)
        return self.classes_[self.net_.predict_indices(X)]

    def history(self) -> TrainHistory:
        self._check_fitted()
        return self.history_
