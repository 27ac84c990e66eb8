"""Command-line entry point.

One subcommand per run: ingest | synth | curate | split | pretrain |
finetune | eval | detect | gradcheck | report. Settings come from a JSON
config file merged over built-in defaults; any key can be overridden with
``--dotted.path=value`` flags. Every run echoes its effective config and
writes a machine-readable result file plus a log into the output
directory. Exit codes: 0 success, 1 domain error, 2 usage error.

Heavy imports happen after ``--threads`` is resolved so BLAS thread pools
can be pinned (default 1, the deterministic reference mode; NEOC_THREADS
is the environment fallback).
"""

from __future__ import annotations

import copy
import json
import os
import sys
import time
from pathlib import Path

from .errors import TaxonetError, UsageError

SUBCOMMANDS = ("ingest", "synth", "curate", "split", "pretrain", "finetune",
               "eval", "detect", "gradcheck", "report")

DEFAULT_CONFIG = {
    "output_dir": "taxonet_out",
    "paths": {
        "corpus_root": None,
        "manifest": None,
        "taxonomy": None,
        "train_manifest": None,
        "test_manifest": None,
        "exclusions": None,
        "checkpoint": None,
        "pretrained_checkpoint": None,
        "metrics": None,
    },
    "synth": {
        "classes": ["chair", "table", "cabinet", "bed", "lamp"],
        "images_per_class": 200,
        "size": 32,
        "noise": 4.0,
        "seed": 42,
        "clutter": None,
    },
    "arch": {
        "input_hw": [32, 32],
        "blocks": [[1, 8], [1, 16], [2, 32]],
        "head": [64],
    },
    "train": {
        "epochs": 15,
        "batch_size": 32,
        "lr": 0.01,
        "momentum": 0.9,
        "lr_decay": 0.95,
        "seed": 42,
        "freeze_blocks_epochs": 0,
        "precision": "float32",
        "patience": None,
    },
    "split": {
        "test_ratio": 0.2,
        "seed": 42,
        "group_by_artifact": True,
    },
    "curation": {
        "fill_color": [128, 128, 128],
    },
    "detect": {
        "scales": [16, 20, 24],
        "stride_fraction": 0.25,
        "iou_threshold": 0.5,
        "score_threshold": 0.3,
        "per_class_nms": False,
        "eval_iou": 0.5,
    },
    "eval": {
        "rollup_depth": None,
        "include_confusion": False,
    },
    "gradcheck": {
        "seeds": 20,
        "eps": 1e-5,
        "tolerance": 1e-5,
    },
}

_FREEFORM_KEYS = {"clutter"}  # merged wholesale, not validated key-by-key

USAGE = """usage: taxonet SUBCOMMAND [--config FILE] [--threads N] [--quiet]
                [--dotted.key=value ...]

subcommands: """ + " ".join(SUBCOMMANDS)


def _deep_merge(base: dict, override: dict, trail: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{trail}.{key}" if trail else key
        if key not in base:
            raise UsageError(
                f"unknown config key {where!r}; valid keys here: "
                + ", ".join(sorted(base))
            )
        if isinstance(base[key], dict) and key not in _FREEFORM_KEYS:
            if not isinstance(value, dict):
                raise UsageError(f"config key {where!r} must be an object")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(cfg: dict, dotted: str, raw: str):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise UsageError(
                f"unknown config key {dotted!r}; valid keys: "
                + ", ".join(sorted(node) if isinstance(node, dict) else [])
            )
        node = node[part]
    last = parts[-1]
    if not isinstance(node, dict) or last not in node:
        raise UsageError(
            f"unknown config key {dotted!r}; valid keys: "
            + ", ".join(sorted(node) if isinstance(node, dict) else [])
        )
    node[last] = value


def _parse_args(argv):
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE)
        raise SystemExit(0 if argv else 2)
    sub = argv[0]
    if sub.startswith("-"):
        raise UsageError(f"expected a subcommand first, got {sub!r}")
    if sub not in SUBCOMMANDS:
        raise UsageError(
            f"unknown subcommand {sub!r}; valid: " + ", ".join(SUBCOMMANDS)
        )
    config_path = None
    threads = None
    quiet = False
    overrides = []
    i = 1
    while i < len(argv):
        arg = argv[i]
        if arg in ("-h", "--help"):
            print(USAGE)
            raise SystemExit(0)
        if arg == "--quiet":
            quiet = True
        elif arg == "--config" or arg.startswith("--config="):
            if "=" in arg:
                config_path = arg.split("=", 1)[1]
            else:
                i += 1
                if i >= len(argv):
                    raise UsageError("--config needs a file path")
                config_path = argv[i]
        elif arg == "--threads" or arg.startswith("--threads="):
            if "=" in arg:
                raw = arg.split("=", 1)[1]
            else:
                i += 1
                if i >= len(argv):
                    raise UsageError("--threads needs a count")
                raw = argv[i]
            try:
                threads = int(raw)
            except ValueError:
                raise UsageError(f"--threads must be an integer, got {raw!r}")
        elif arg.startswith("--") and "=" in arg:
            dotted, raw = arg[2:].split("=", 1)
            overrides.append((dotted, raw))
        else:
            raise UsageError(
                f"unrecognized argument {arg!r}; flags are --config, --threads, "
                "--quiet, or --dotted.key=value overrides"
            )
        i += 1
    return sub, config_path, threads, quiet, overrides


def _set_thread_env(threads: int):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(threads)


class _RunLog:
    """Plain-text event log: one line per event, mirrored to stderr."""

    def __init__(self, path: Path, quiet: bool):
        self.path = path
        self.quiet = quiet
        self.fh = open(path, "w")

    def __call__(self, message: str):
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        self.fh.write(f"{stamp} {message}\n")
        self.fh.flush()
        if not self.quiet:
            print(message, file=sys.stderr)

    def close(self):
        self.fh.close()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise TaxonetError(f"{what} not found: {path}")
    return path


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise TaxonetError(f"{what} not found: {path}")
    return path


def _path_or(cfg, key: str, out: Path, default_name: str) -> Path:
    value = cfg["paths"].get(key)
    return Path(value) if value else out / default_name


def _resolve_checkpoint(cfg, out: Path) -> Path:
    value = cfg["paths"].get("checkpoint")
    if value:
        return _require_file(Path(value), "checkpoint")
    for name in ("finetuned.neoc", "pretrained.neoc"):
        candidate = out / name
        if candidate.is_file():
            return candidate
    raise TaxonetError(
        f"no checkpoint at {out}/finetuned.neoc or {out}/pretrained.neoc; "
        "set paths.checkpoint"
    )


def _optional_test_manifest(cfg, out: Path):
    from .manifest import CorpusManifest

    value = cfg["paths"].get("test_manifest")
    if value:
        return CorpusManifest.load(_require_file(Path(value), "test manifest"))
    candidate = out / "test.jsonl"
    if candidate.is_file():
        return CorpusManifest.load(candidate)
    return None


def _load_exclusions(cfg, out: Path):
    """Returns (non_computable pairs, split descriptor dict or None)."""
    value = cfg["paths"].get("exclusions")
    path = Path(value) if value else out / "split_exclusions.json"
    if value:
        _require_file(path, "exclusions file")
    if not path.is_file():
        return [], None
    data = json.loads(path.read_text())
    pairs = [(e["class"], e["reason"]) for e in data.get("non_computable", [])]
    return pairs, data.get("split")


# -- subcommand handlers -------------------------------------------------------


def _cmd_synth(cfg, out: Path, log):
    from .synthetic import SyntheticSpec, build_taxonomy, generate_corpus

    synth_cfg = dict(cfg["synth"])
    seed = int(synth_cfg.pop("seed"))
    spec = SyntheticSpec.from_dict(synth_cfg)
    corpus_root = _path_or(cfg, "corpus_root", out, "corpus")
    manifest_path = _path_or(cfg, "manifest", out, "manifest.jsonl")
    taxonomy_path = _path_or(cfg, "taxonomy", out, "taxonomy.json")
    log(f"generating synthetic corpus ({len(spec.classes)} classes x "
        f"{spec.images_per_class}) into {corpus_root}")
    manifest = generate_corpus(spec, seed, corpus_root)
    manifest.save(manifest_path)
    build_taxonomy(spec.classes).save(taxonomy_path)
    log(f"wrote {len(manifest)} samples to {manifest_path}")
    return {
        "samples": len(manifest),
        "classes": list(spec.classes),
        "corpus_root": str(corpus_root),
        "manifest": str(manifest_path),
        "taxonomy": str(taxonomy_path),
        "seed": seed,
    }


def _cmd_ingest(cfg, out: Path, log):
    from .manifest import ingest_folder_corpus

    root = cfg["paths"].get("corpus_root")
    if not root:
        raise TaxonetError("ingest requires paths.corpus_root")
    root = _require_dir(Path(root), "corpus root")
    manifest_path = _path_or(cfg, "manifest", out, "manifest.jsonl")
    taxonomy_path = _path_or(cfg, "taxonomy", out, "taxonomy.json")
    taxonomy, manifest = ingest_folder_corpus(root)
    manifest.save(manifest_path)
    taxonomy.save(taxonomy_path)
    log(f"ingested {len(manifest)} samples, {len(taxonomy.classes())} classes")
    return {
        "samples": len(manifest),
        "classes": taxonomy.classes(),
        "manifest": str(manifest_path),
        "taxonomy": str(taxonomy_path),
    }


def _cmd_curate(cfg, out: Path, log):
    from .curation import CurationRules, curate
    from .manifest import CorpusManifest

    manifest_path = _require_file(_path_or(cfg, "manifest", out, "manifest.jsonl"),
                                  "manifest")
    corpus_root = _require_dir(_path_or(cfg, "corpus_root", out, "corpus"),
                               "corpus root")
    manifest = CorpusManifest.load(manifest_path)
    rules = CurationRules(fill_color=tuple(cfg["curation"]["fill_color"]))
    curated_dir = out / "curated"
    kept, excluded = curate(manifest, corpus_root, curated_dir, rules)
    kept.save(out / "curated.jsonl")
    _write_json(out / "curation_exclusions.json",
                {"excluded": [e.to_dict() for e in excluded]})
    log(f"curated: kept {len(kept)} samples, excluded {len(excluded)}")
    return {
        "kept": len(kept),
        "excluded": len(excluded),
        "curated_corpus": str(curated_dir),
        "curated_manifest": str(out / "curated.jsonl"),
        "exclusions": str(out / "curation_exclusions.json"),
    }


def _cmd_split(cfg, out: Path, log):
    from .manifest import CorpusManifest
    from .splitting import stratified_split

    manifest_path = _require_file(_path_or(cfg, "manifest", out, "manifest.jsonl"),
                                  "manifest")
    manifest = CorpusManifest.load(manifest_path)
    s = cfg["split"]
    result = stratified_split(manifest, test_ratio=float(s["test_ratio"]),
                              seed=int(s["seed"]),
                              group_by_artifact=bool(s["group_by_artifact"]))
    result.train.save(out / "train.jsonl")
    result.test.save(out / "test.jsonl")
    _write_json(out / "split_exclusions.json", {
        "non_computable": [{"class": c, "reason": r}
                           for c, r in result.non_computable],
        "split": result.descriptor.to_dict(),
    })
    log(f"split: {len(result.train)} train, {len(result.test)} test, "
        f"{len(result.non_computable)} non-computable classes")
    return {
        "train": len(result.train),
        "test": len(result.test),
        "non_computable": [{"class": c, "reason": r}
                           for c, r in result.non_computable],
        "train_manifest": str(out / "train.jsonl"),
        "test_manifest": str(out / "test.jsonl"),
        "exclusions": str(out / "split_exclusions.json"),
    }


def _history_summary(history):
    final = history.final()
    return {
        "epochs_run": len(history),
        "final_train_loss": final.train_loss,
        "final_train_accuracy": final.train_accuracy,
        "final_test_mean_class_accuracy": final.test_mean_class_accuracy,
    }


def _cmd_pretrain(cfg, out: Path, log):
    from .manifest import CorpusManifest
    from .pipeline import train_classifier
    from .training import TrainConfig

    train_path = _require_file(
        _path_or(cfg, "train_manifest", out, "train.jsonl"), "train manifest")
    corpus_root = _require_dir(_path_or(cfg, "corpus_root", out, "corpus"),
                               "corpus root")
    train_manifest = CorpusManifest.load(train_path)
    test_manifest = _optional_test_manifest(cfg, out)
    config = TrainConfig.from_dict(cfg["train"])
    arch_cfg = cfg["arch"]
    log(f"pre-training on {len(train_manifest)} samples")
    ckpt, history = train_classifier(
        train_manifest, corpus_root, config,
        input_hw=tuple(arch_cfg["input_hw"]),
        blocks=tuple(tuple(b) for b in arch_cfg["blocks"]),
        head=tuple(arch_cfg["head"]),
        test_manifest=test_manifest, log=log)
    ckpt.save(out / "pretrained.neoc")
    history.to_csv(out / "pretrain_history.csv")
    return {
        "checkpoint": str(out / "pretrained.neoc"),
        "history": str(out / "pretrain_history.csv"),
        "classes": ckpt.class_names,
        **_history_summary(history),
    }


def _cmd_finetune(cfg, out: Path, log):
    from .checkpoint import Checkpoint
    from .manifest import CorpusManifest
    from .pipeline import finetune_classifier
    from .training import TrainConfig

    pre_path = _require_file(
        _path_or(cfg, "pretrained_checkpoint", out, "pretrained.neoc"),
        "pre-trained checkpoint")
    train_path = _require_file(
        _path_or(cfg, "train_manifest", out, "train.jsonl"), "train manifest")
    corpus_root = _require_dir(_path_or(cfg, "corpus_root", out, "corpus"),
                               "corpus root")
    pretrained = Checkpoint.load(pre_path)
    train_manifest = CorpusManifest.load(train_path)
    test_manifest = _optional_test_manifest(cfg, out)
    config = TrainConfig.from_dict(cfg["train"])
    log(f"fine-tuning from {pre_path} on {len(train_manifest)} samples")
    ckpt, history = finetune_classifier(pretrained, train_manifest, corpus_root,
                                        config, test_manifest=test_manifest,
                                        log=log)
    ckpt.save(out / "finetuned.neoc")
    history.to_csv(out / "finetune_history.csv")
    return {
        "checkpoint": str(out / "finetuned.neoc"),
        "history": str(out / "finetune_history.csv"),
        "classes": ckpt.class_names,
        "lineage": ckpt.lineage,
        **_history_summary(history),
    }


def _cmd_eval(cfg, out: Path, log):
    from .checkpoint import Checkpoint
    from .manifest import CorpusManifest
    from .pipeline import evaluate_checkpoint
    from .taxonomy import Taxonomy

    ckpt_path = _resolve_checkpoint(cfg, out)
    test_path = _require_file(
        _path_or(cfg, "test_manifest", out, "test.jsonl"), "test manifest")
    corpus_root = _require_dir(_path_or(cfg, "corpus_root", out, "corpus"),
                               "corpus root")
    ckpt = Checkpoint.load(ckpt_path)
    test_manifest = CorpusManifest.load(test_path)
    excluded, split_desc = _load_exclusions(cfg, out)
    rollup_depth = cfg["eval"]["rollup_depth"]
    taxonomy = None
    if rollup_depth is not None:
        tax_path = _require_file(_path_or(cfg, "taxonomy", out, "taxonomy.json"),
                                 "taxonomy")
        taxonomy = Taxonomy.load(tax_path)
    log(f"evaluating {ckpt_path} on {len(test_manifest)} samples")
    report, predictions = evaluate_checkpoint(
        ckpt, test_manifest, corpus_root,
        excluded_with_reasons=excluded, split=split_desc,
        taxonomy=taxonomy, rollup_depth=rollup_depth,
        include_confusion=bool(cfg["eval"]["include_confusion"]))
    report.save(out / "metrics.json")
    with open(out / "predictions.jsonl", "w") as fh:
        for p in predictions:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
    log(f"mean class accuracy {report.mean_class_accuracy:.4f}, "
        f"macro F1 {report.macro_f1:.4f}")
    return {
        "metrics": str(out / "metrics.json"),
        "predictions": str(out / "predictions.jsonl"),
        "checkpoint": str(ckpt_path),
        "mean_class_accuracy": report.mean_class_accuracy,
        "macro_f1": report.macro_f1,
        "overall_accuracy": report.overall_accuracy,
        "excluded_classes": report.excluded_classes,
    }


def _cmd_detect(cfg, out: Path, log):
    from .checkpoint import Checkpoint
    from .detect import (Region, classify_regions, evaluate_detections, nms,
                         overall_recall, propose_regions)
    from .manifest import CorpusManifest
    from .ppm import read_ppm

    ckpt_path = _resolve_checkpoint(cfg, out)
    manifest_path = _require_file(
        _path_or(cfg, "manifest", out, "test.jsonl"), "manifest")
    corpus_root = _require_dir(_path_or(cfg, "corpus_root", out, "corpus"),
                               "corpus root")
    ckpt = Checkpoint.load(ckpt_path)
    manifest = CorpusManifest.load(manifest_path)
    d = cfg["detect"]
    detections_per_image = []
    gt_per_image = []
    have_gt = False
    log(f"detecting over {len(manifest)} images with scales {d['scales']}")
    with open(out / "detections.jsonl", "w") as fh:
        for sample in manifest:
            image = read_ppm(Path(corpus_root) / sample.path)
            regions = propose_regions(image, d["scales"],
                                      float(d["stride_fraction"]))
            dets = classify_regions(ckpt, image, regions)
            kept = nms(dets, iou_threshold=float(d["iou_threshold"]),
                       score_threshold=float(d["score_threshold"]),
                       per_class=bool(d["per_class_nms"]))
            detections_per_image.append(kept)
            fh.write(json.dumps({
                "image": sample.path,
                "regions": [det.to_dict() for det in kept],
            }, sort_keys=True) + "\n")
            gts = [(Region(x=b.x, y=b.y, w=b.w, h=b.h), b.cls)
                   for b in sample.boxes]
            gt_per_image.append(gts)
            have_gt = have_gt or bool(gts)
    result = {
        "detections": str(out / "detections.jsonl"),
        "images": len(manifest),
        "total_detections": sum(len(d) for d in detections_per_image),
    }
    if have_gt:
        per_class = evaluate_detections(detections_per_image, gt_per_image,
                                        iou_threshold=float(d["eval_iou"]))
        metrics = {
            "per_class": {c: m.to_dict() for c, m in per_class.items()},
            "recall": overall_recall(per_class),
            "iou_threshold": float(d["eval_iou"]),
        }
        _write_json(out / "detection_metrics.json", metrics)
        result["detection_metrics"] = str(out / "detection_metrics.json")
        result["recall"] = metrics["recall"]
        log(f"detection recall {metrics['recall']:.4f} at IoU {d['eval_iou']}")
    return result


def _cmd_gradcheck(cfg, out: Path, log):
    from .gradcheck import run_suite, suite_max_error

    g = cfg["gradcheck"]
    cases = run_suite(seeds=range(int(g["seeds"])), eps=float(g["eps"]))
    worst = suite_max_error(cases)
    tolerance = float(g["tolerance"])
    passed = worst < tolerance
    payload = {
        "passed": passed,
        "max_rel_err": worst,
        "tolerance": tolerance,
        "seeds": int(g["seeds"]),
        "cases": [
            {"op": c.op, "wrt": c.wrt, "seed": c.seed, "max_rel_err": c.max_rel_err}
            for c in cases
        ],
    }
    _write_json(out / "gradcheck.json", payload)
    log(f"gradcheck max relative error {worst:.3e} "
        f"({'PASS' if passed else 'FAIL'} at {tolerance:g})")
    if not passed:
        raise TaxonetError(
            f"gradient check failed: max relative error {worst:.3e} "
            f">= tolerance {tolerance:g}"
        )
    return payload


def _cmd_report(cfg, out: Path, log):
    from .metrics import render_table

    metrics_path = _require_file(_path_or(cfg, "metrics", out, "metrics.json"),
                                 "metrics file")
    report = json.loads(metrics_path.read_text())
    table = render_table(report)
    (out / "report.txt").write_text(table)
    print(table, end="")
    log(f"report written to {out / 'report.txt'}")
    return {"report": str(out / "report.txt"), "metrics": str(metrics_path)}


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "curate": _cmd_curate,
    "split": _cmd_split,
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "detect": _cmd_detect,
    "gradcheck": _cmd_gradcheck,
    "report": _cmd_report,
}


def build_config(config_path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise TaxonetError(f"config file not found: {path}")
        try:
            user_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise TaxonetError(f"config file {path} is not valid JSON: {e}")
        if not isinstance(user_cfg, dict):
            raise TaxonetError(f"config file {path} must hold a JSON object")
        cfg = _deep_merge(cfg, user_cfg)
    for dotted, raw in overrides:
        _apply_override(cfg, dotted, raw)
    return cfg


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        sub, config_path, threads, quiet, overrides = _parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)

    if threads is None:
        threads = int(os.environ.get("NEOC_THREADS", "1"))
    _set_thread_env(threads)

    log = None
    try:
        cfg = build_config(config_path, overrides)
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / f"{sub}.config.json", cfg)
        log = _RunLog(out / f"{sub}.log", quiet)
        log(f"taxonet {sub} (threads={threads})")
        result = _HANDLERS[sub](cfg, out, log)
        result = {"command": sub, "status": "ok", **result}
        _write_json(out / f"{sub}.result.json", result)
        log(f"{sub} finished")
        return 0
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 2
    except (TaxonetError, OSError) as e:
        message = f"{type(e).__name__}: {e}"
        if log is not None:
            log(f"ERROR {message}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    finally:
        if log is not None:
            log.close()


if __name__ == "__main__":
    sys.exit(main())
