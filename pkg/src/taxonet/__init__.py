"""taxonet: classify artifact images under a hierarchical taxonomy.

Desk-scale, self-contained: corpus curation, a small VGG-style CNN
trained from scratch (numpy only), pre-train/fine-tune transfer,
exclusion-aware evaluation metrics, and a sliding-window
detect-then-classify stage.

Submodules import numpy; this package init stays light so the CLI can pin
BLAS thread counts before any heavy import.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "ConvNetClassifier": "estimator",
    "ArchitectureConfig": "network",
    "ConvNet": "network",
    "Checkpoint": "checkpoint",
    "NormStats": "checkpoint",
    "Taxonomy": "taxonomy",
    "CorpusManifest": "manifest",
    "Sample": "manifest",
    "Box": "manifest",
    "TrainConfig": "training",
    "TrainHistory": "training",
    "SyntheticSpec": "synthetic",
    "ClutterSpec": "synthetic",
    "ImageRecord": "ppm",
    "MetricsReport": "metrics",
    "ConfusionMatrix": "metrics",
    "Region": "detect",
    "Detection": "detect",
    "TaxonetError": "errors",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
