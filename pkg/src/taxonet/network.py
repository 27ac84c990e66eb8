"""VGG-style convolutional classifier assembled from the layer primitives.

An architecture is a list of blocks, each ``conv_count`` 3x3 conv+relu
layers followed by a 2x2 max pool, then dense head layers and a final
dense output layer. The final layer's init is scaled down so a fresh
model starts close to the uniform distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers
from .errors import ValidationError
from .rng import derive_seed
from .validation import check_image_batch, resolve_dtype

# final dense layer init scale; keeps fresh logits near zero so new models
# start near the uniform distribution and head re-initialization does not
# blow away pre-trained features
OUTPUT_INIT_SCALE = 0.02


@dataclass(frozen=True)
class ArchitectureConfig:
    input_size: tuple[int, int, int] = (3, 64, 64)
    blocks: tuple[tuple[int, int], ...] = ((1, 8), (1, 16), (2, 32))
    head: tuple[int, ...] = (64,)
    num_classes: int = 5

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(
            self, "blocks", tuple((int(a), int(b)) for a, b in self.blocks)
        )
        object.__setattr__(self, "head", tuple(int(v) for v in self.head))

    def validate(self):
        c, h, w = self.input_size
        if c < 1 or h < 1 or w < 1:
            raise ValidationError(f"input_size must be positive, got {self.input_size}")
        if not self.blocks:
            raise ValidationError("architecture needs at least one block")
        div = 2 ** len(self.blocks)
        if h % div or w % div:
            raise ValidationError(
                f"input {h}x{w} must be divisible by 2^{len(self.blocks)}={div} "
                "(one max pool per block)"
            )
        for i, (count, out_ch) in enumerate(self.blocks):
            if count < 1 or out_ch < 1:
                raise ValidationError(f"block {i + 1} has invalid spec {count}x{out_ch}")
        if any(wd < 1 for wd in self.head):
            raise ValidationError(f"head widths must be positive, got {self.head}")
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        return self

    def to_dict(self) -> dict:
        return {
            "input_size": list(self.input_size),
            "blocks": [list(b) for b in self.blocks],
            "head": list(self.head),
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureConfig":
        return cls(
            input_size=tuple(d["input_size"]),
            blocks=tuple(tuple(b) for b in d["blocks"]),
            head=tuple(d["head"]),
            num_classes=int(d["num_classes"]),
        ).validate()


def parameter_shapes(config: ArchitectureConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) pairs implied by the architecture."""
    c, h, w = config.input_size
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for bi, (count, out_ch) in enumerate(config.blocks, start=1):
        for ci in range(1, count + 1):
            shapes.append((f"block{bi}.conv{ci}.weight", (out_ch, c, 3, 3)))
            shapes.append((f"block{bi}.conv{ci}.bias", (out_ch,)))
            c = out_ch
        h //= 2
        w //= 2
    width = c * h * w
    for hi, hidden in enumerate(config.head, start=1):
        shapes.append((f"head{hi}.weight", (width, hidden)))
        shapes.append((f"head{hi}.bias", (hidden,)))
        width = hidden
    shapes.append(("output.weight", (width, config.num_classes)))
    shapes.append(("output.bias", (config.num_classes,)))
    return shapes


def parameter_count(config: ArchitectureConfig) -> int:
    return sum(int(np.prod(s)) for _, s in parameter_shapes(config))


def _init_parameter(name: str, shape, base_seed: int, index: int, dtype) -> layers.Parameter:
    if name.endswith(".bias"):
        value = np.zeros(shape, dtype=dtype)
    else:
        scale = OUTPUT_INIT_SCALE if name.startswith("output.") else 1.0
        value = layers.he_init(shape, derive_seed(base_seed, index), dtype=dtype, scale=scale)
    return layers.Parameter(name, value)


class ConvNet:
    """The assembled classifier: parameters plus the forward/backward walk."""

    def __init__(self, config: ArchitectureConfig, params: list[layers.Parameter],
                 dtype, class_names=None):
        self.config = config
        self.params = params
        self.dtype = np.dtype(dtype)
        self.class_names = list(class_names) if class_names is not None else None
        self._by_name = {p.name: p for p in params}
        expected = parameter_shapes(config)
        if [(p.name, p.value.shape) for p in params] != [(n, tuple(s)) for n, s in expected]:
            raise ValidationError("parameter list does not match the architecture")

    @classmethod
    def build(cls, config: ArchitectureConfig, seed: int, precision="float32") -> "ConvNet":
        config.validate()
        dtype = resolve_dtype(precision)
        params = [
            _init_parameter(name, shape, seed, i, dtype)
            for i, (name, shape) in enumerate(parameter_shapes(config))
        ]
        return cls(config, params, dtype)

    def param(self, name: str) -> layers.Parameter:
        return self._by_name[name]

    @property
    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.params)

    def set_blocks_frozen(self, frozen: bool):
        for p in self.params:
            if p.name.startswith("block"):
                p.frozen = frozen

    def forward_logits(self, x: np.ndarray, with_cache: bool = False):
        x = check_image_batch(x, input_size=self.config.input_size, dtype=self.dtype)
        if x.dtype != self.dtype:
            x = x.astype(self.dtype)
        caches = [] if with_cache else None
        for bi, (count, _) in enumerate(self.config.blocks, start=1):
            for ci in range(1, count + 1):
                w = self.param(f"block{bi}.conv{ci}.weight")
                b = self.param(f"block{bi}.conv{ci}.bias")
                x, cache = layers.conv2d_forward(x, w.value, b.value, stride=1, pad=1)
                if with_cache:
                    caches.append(("conv", f"block{bi}.conv{ci}", cache))
                x, rc = layers.relu_forward(x)
                if with_cache:
                    caches.append(("relu", None, rc))
            x, pc = layers.maxpool2_forward(x)
            if with_cache:
                caches.append(("pool", None, pc))
        n = x.shape[0]
        flat_shape = x.shape
        x = x.reshape(n, -1)
        if with_cache:
            caches.append(("flatten", None, flat_shape))
        for hi in range(1, len(self.config.head) + 1):
            w = self.param(f"head{hi}.weight")
            b = self.param(f"head{hi}.bias")
            x, cache = layers.dense_forward(x, w.value, b.value)
            if with_cache:
                caches.append(("dense", f"head{hi}", cache))
            x, rc = layers.relu_forward(x)
            if with_cache:
                caches.append(("relu", None, rc))
        w = self.param("output.weight")
        b = self.param("output.bias")
        x, cache = layers.dense_forward(x, w.value, b.value)
        if with_cache:
            caches.append(("dense", "output", cache))
        return (x, caches) if with_cache else x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities; rows are softmax distributions."""
        return layers.softmax(self.forward_logits(x))

    def predict_indices(self, x: np.ndarray) -> np.ndarray:
        """Argmax class indices; ties break toward the lowest index."""
        return self.forward_logits(x).argmax(axis=1)

    def backward(self, grad_logits: np.ndarray, caches):
        """Accumulate parameter gradients for the cached forward pass."""
        grad = grad_logits
        for kind, name, cache in reversed(caches):
            if kind == "dense":
                grad, dw, db = layers.dense_backward(grad, cache)
                self.param(f"{name}.weight").grad += dw
                self.param(f"{name}.bias").grad += db
            elif kind == "relu":
                grad = layers.relu_backward(grad, cache)
            elif kind == "flatten":
                grad = grad.reshape(cache)
            elif kind == "pool":
                grad = layers.maxpool2_backward(grad, cache)
            elif kind == "conv":
                grad, dw, db = layers.conv2d_backward(grad, cache)
                self.param(f"{name}.weight").grad += dw
                self.param(f"{name}.bias").grad += db
            else:  # pragma: no cover - internal invariant
                raise AssertionError(f"unknown cache kind {kind}")
        return grad

    def reinit_head(self, new_num_classes: int, seed: int) -> "ConvNet":
        """Fresh output layer for a new class set; every other parameter is
        preserved bit-exactly. Class names are cleared pending training."""
        if new_num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {new_num_classes}")
        new_config = ArchitectureConfig(
            input_size=self.config.input_size,
            blocks=self.config.blocks,
            head=self.config.head,
            num_classes=new_num_classes,
        ).validate()
        shapes = parameter_shapes(new_config)
        params = []
        for i, (name, shape) in enumerate(shapes):
            if name.startswith("output."):
                params.append(_init_parameter(name, shape, seed, i, self.dtype))
            else:
                params.append(layers.Parameter(name, self.param(name).value.copy()))
        return ConvNet(new_config, params, self.dtype)

    def astype(self, precision) -> "ConvNet":
        dtype = resolve_dtype(precision)
        params = [layers.Parameter(p.name, p.value.astype(dtype)) for p in self.params]
        return ConvNet(self.config, params, dtype, class_names=self.class_names)
