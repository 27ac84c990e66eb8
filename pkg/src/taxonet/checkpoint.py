"""Self-contained model checkpoints.

File layout: 5 magic bytes ``NEOC1``, one line of canonical JSON (the
header: architecture, class names, normalization stats, weight blob byte
length, optional lineage hash), a newline, then the raw little-endian
float32 weight blob. Save -> load -> save is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (CheckpointMagicError, CheckpointShapeError,
                     CheckpointTruncatedError, ValidationError)
from .layers import Parameter
from .network import ArchitectureConfig, ConvNet, parameter_shapes

MAGIC = b"NEOC1"


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean/std of pixel values scaled to [0, 1]."""

    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "std", tuple(float(v) for v in self.std))
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValidationError("normalization stats must have 3 channels")
        if any(s <= 0 for s in self.std):
            raise ValidationError("normalization std must be positive")

    def to_dict(self):
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=tuple(d["mean"]), std=tuple(d["std"]))


@dataclass
class Checkpoint:
    arch: ArchitectureConfig
    class_names: list[str]
    normalization: NormStats
    weights: list[np.ndarray]  # float32 arrays in parameter order
    lineage: str | None = None  # sha256 of the pre-training checkpoint, if any

    def __post_init__(self):
        if len(self.class_names) != self.arch.num_classes:
            raise ValidationError(
                f"{len(self.class_names)} class names for "
                f"{self.arch.num_classes}-way architecture"
            )
        expected = parameter_shapes(self.arch)
        if len(self.weights) != len(expected):
            raise CheckpointShapeError(
                f"checkpoint has {len(self.weights)} weight arrays, "
                f"architecture implies {len(expected)}"
            )
        self.weights = [np.ascontiguousarray(w, dtype=np.float32) for w in self.weights]
        for w, (name, shape) in zip(self.weights, expected):
            if w.shape != tuple(shape):
                raise CheckpointShapeError(
                    f"weight {name} has shape {w.shape}, expected {tuple(shape)}"
                )

    @classmethod
    def from_net(cls, net: ConvNet, normalization: NormStats,
                 lineage: str | None = None) -> "Checkpoint":
        if net.class_names is None:
            raise ValidationError("model has no class names; train it first")
        return cls(
            arch=net.config,
            class_names=list(net.class_names),
            normalization=normalization,
            weights=[p.value for p in net.params],
            lineage=lineage,
        )

    def to_net(self, precision="float32") -> ConvNet:
        params = [
            Parameter(name, w.astype(np.dtype(precision)))
            for (name, _), w in zip(parameter_shapes(self.arch), self.weights)
        ]
        return ConvNet(self.arch, params, np.dtype(precision),
                       class_names=self.class_names)

    def to_bytes(self) -> bytes:
        blob = b"".join(w.tobytes() for w in self.weights)
        header = {
            "arch": self.arch.to_dict(),
            "class_names": list(self.class_names),
            "normalization": self.normalization.to_dict(),
            "weights_bytes": len(blob),
        }
        if self.lineage is not None:
            header["lineage"] = self.lineage
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return MAGIC + head + b"\n" + blob

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
            raise CheckpointMagicError(
                f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}"
            )
        nl = data.find(b"\n", len(MAGIC))
        if nl < 0:
            raise CheckpointTruncatedError("file ends inside the JSON header")
        try:
            header = json.loads(data[len(MAGIC):nl].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointTruncatedError(f"unreadable JSON header: {e}") from e
        arch = ArchitectureConfig.from_dict(header["arch"])
        blob = data[nl + 1:]
        declared = int(header["weights_bytes"])
        if len(blob) < declared:
            raise CheckpointTruncatedError(
                f"weight blob truncated: {len(blob)} of {declared} bytes"
            )
        if len(blob) > declared:
            raise CheckpointTruncatedError(
                f"{len(blob) - declared} trailing bytes after the weight blob"
            )
        shapes = parameter_shapes(arch)
        expected_bytes = sum(int(np.prod(s)) for _, s in shapes) * 4
        if declared != expected_bytes:
            raise CheckpointShapeError(
                f"weight blob is {declared} bytes, architecture implies {expected_bytes}"
            )
        weights = []
        offset = 0
        for _, shape in shapes:
            n = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
            weights.append(arr.reshape(shape).copy())
            offset += n * 4
        return cls(
            arch=arch,
            class_names=list(header["class_names"]),
            normalization=NormStats.from_dict(header["normalization"]),
            weights=weights,
            lineage=header.get("lineage"),
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()
