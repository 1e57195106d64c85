"""
Subcommand implementations for the homotopy-seg CLI.

Every command reads its settings from a resolved Config (command-line
flags are merged in by the front-end), does its work through the library
and writes its artifacts together with a config.json echo of the
configuration that produced them.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.gradcheck import run_gradcheck
from ..core.metrics import apply_scaler, build_report, eer, fit_scaler, roc_curve, write_roc_csv
from ..core.model import init_model, load_checkpoint, save_checkpoint
from ..core.trainer import HomotopyTrainer, predict_scores, prediction_smoothness, write_history_csv
from ..data.corpus import SPLIT_EVAL, SPLIT_TRAIN, load_patches, write_corpus
from ..data.models import (
    BrushSpec,
    GradcheckConfig,
    MetricsReport,
    Patch,
    ScoreScaler,
    TrainConfig,
)
from ..data.synthdata import build_scene_specs
from ..utils.config import Config
from ..utils.exceptions import EXIT_OK, CheckpointError, ConfigurationError, UsageError
from .report import format_smoothness_table, format_table

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.json"
METRICS_FILE = "metrics.json"
DEFAULT_THRESHOLD = 0.5
DEFAULT_CORPUS_DIR = "corpus"

PathLike = Union[str, Path]


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    """Write JSON deterministically (sorted keys, two-space indent)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def read_metrics(path: PathLike) -> Dict[str, Any]:
    """Load metrics JSON from a file or an eval output directory."""
    path = Path(path)
    if path.is_dir():
        path = path / METRICS_FILE
    if not path.exists():
        raise CheckpointError(f"metrics file not found: {path}")
    with open(path, "r") as f:
        return json.load(f)


def _require(config: Config, key: str, flag: str) -> str:
    value = config.get(key)
    if not value:
        raise UsageError(f"{flag} is required")
    return value


def _echo_config(config: Config, out_dir: PathLike) -> Path:
    path = config.save_config(Path(out_dir) / CONFIG_ECHO)
    logger.info(f"Configuration echoed to {path}")
    return path


def cmd_gen_data(config: Config) -> int:
    """Generate a synthetic corpus: scenes, masks, patches and manifest."""
    if not config.get("run.out"):
        config.set("run.out", DEFAULT_CORPUS_DIR)
    out_dir = Path(config.get("run.out"))
    seed = int(config.get("data.seed", 0))
    specs = build_scene_specs(
        count=int(config.get("data.scenes", 4)),
        width=int(config.get("data.width", 1120)),
        height=int(config.get("data.height", 1120)),
        grass_fraction=float(config.get("data.grass_fraction", 0.5)),
        seed=seed,
        fence_lines=int(config.get("data.fence_lines", 0)),
        elevations=[float(e) for e in config.get("data.elevations", [10.0])],
    )
    brush = BrushSpec(diameter_px=int(config.get("data.brush_diameter", 64)))
    manifest = write_corpus(
        out_dir,
        specs,
        brush,
        patch_size=int(config.get("data.patch_size", 224)),
        ratio=float(config.get("data.split_ratio", 0.9)),
        seed=seed,
    )
    _echo_config(config, out_dir)

    counts = manifest["split"].value_counts()
    print(f"Wrote {len(specs)} scenes and {len(manifest)} patches "
          f"({int(counts.get(SPLIT_TRAIN, 0))} train / {int(counts.get(SPLIT_EVAL, 0))} eval) to {out_dir}")
    return EXIT_OK


def cmd_train(config: Config) -> int:
    """Train a model on the train split and write checkpoints and history."""
    data_dir = _require(config, "run.data", "--data")
    out_dir = Path(_require(config, "run.out", "--out"))
    train_config = TrainConfig.from_config(config)

    train_set = load_patches(data_dir, SPLIT_TRAIN, labels="brush")
    init_path = config.get("run.init")
    if init_path:
        model, _ = load_checkpoint(init_path)
        logger.info(f"Fine-tuning from {init_path}")
    else:
        model = init_model(train_config.seed, c_in=int(config.get("model.c_in", 3)),
                           c_hidden=int(config.get("model.c_hidden", 8)))

    trainer = HomotopyTrainer(train_config, model, checkpoint_dir=out_dir / "checkpoints")
    model, history = trainer.run(train_set)

    save_checkpoint(out_dir / "final.ckpt", model, trainer.state)
    write_history_csv(history, out_dir / "history.csv")
    last = history.records[-1]
    summary = {
        "mode": train_config.mode,
        "epochs": train_config.epochs,
        "steps": len(history),
        "train_patches": len(train_set),
        "final_t": history.final_t,
        "last_logged_t": last.t,
        "final_alpha": history.final_alpha,
        "last_dicece": last.dicece,
        "last_smooth": last.smooth,
        "last_combined": last.combined,
    }
    write_json(out_dir / "summary.json", summary)
    _echo_config(config, out_dir)

    print(f"Trained {train_config.mode} for {len(history)} steps: final t={history.final_t:.4f} "
          f"(last history row trained at t={last.t:.4f}), combined loss {last.combined:.6f}; "
          f"checkpoint {out_dir / 'final.ckpt'}")
    return EXIT_OK


def calibrate(model, patches: Sequence[Patch]) -> Tuple[Optional[ScoreScaler], float]:
    """Fit the score scaler and the EER threshold on calibration patches.

    Returns:
        (scaler or None when scores are used unnormalized, threshold in [0, 1])
    """
    if not patches:
        logger.warning(f"No calibration patches; using raw scores and threshold {DEFAULT_THRESHOLD}")
        return None, DEFAULT_THRESHOLD

    scores, labels = predict_scores(model, patches)
    scaler: Optional[ScoreScaler] = None
    try:
        scaler = fit_scaler(scores)
        scores = apply_scaler(scaler, scores)
    except ConfigurationError as e:
        logger.warning(f"Score scaler not fitted ({e}); scores are used unnormalized")

    try:
        _, threshold = eer(roc_curve(scores, labels))
    except UsageError as e:
        logger.warning(f"No calibration EER ({e}); threshold {DEFAULT_THRESHOLD}")
        threshold = DEFAULT_THRESHOLD
    return scaler, float(np.clip(threshold, 0.0, 1.0))


def eval_fingerprint(patches: Sequence[Patch], labels: str) -> str:
    """Digest of patch names and masks identifying an evaluation set."""
    digest = hashlib.sha256(labels.encode("utf-8"))
    for patch in patches:
        digest.update(patch.name.encode("utf-8"))
        digest.update(np.ascontiguousarray(patch.mask, dtype=np.uint8).tobytes())
    return digest.hexdigest()


def smoothness_stats(values: np.ndarray) -> Dict[str, float]:
    return {
        "mean": float(np.mean(values)),
        "median": float(np.median(values)),
        "max": float(np.max(values)),
    }


def cmd_eval(config: Config) -> int:
    """Evaluate a checkpoint on the eval split; write metrics, ROC and report."""
    data_dir = _require(config, "run.data", "--data")
    checkpoint = Path(_require(config, "run.checkpoint", "--checkpoint"))
    out_dir = Path(_require(config, "run.out", "--out"))
    labels = str(config.get("eval.labels", "brush"))
    name = config.get("run.name") or checkpoint.parent.name or checkpoint.stem

    model, _ = load_checkpoint(checkpoint)
    eval_set = load_patches(data_dir, SPLIT_EVAL, labels=labels)
    if not eval_set:
        raise UsageError(f"corpus {data_dir} has no eval patches")
    scaler, calibration_threshold = calibrate(model, load_patches(data_dir, SPLIT_TRAIN, labels=labels))

    override = config.get("eval.threshold")
    threshold = float(override) if override is not None else calibration_threshold
    scores, truth = predict_scores(model, eval_set)
    if scaler is not None:
        scores = apply_scaler(scaler, scores)
    report = build_report(scores, truth, threshold)

    metrics = report.to_dict()
    metrics.update({
        "model_name": name,
        "labels": labels,
        "threshold_source": "override" if override is not None else "calibration",
        "calibration_threshold": calibration_threshold,
        "scaler": scaler.to_dict() if scaler is not None else None,
        "eval_patches": len(eval_set),
        "eval_fingerprint": eval_fingerprint(eval_set, labels),
        "smoothness": smoothness_stats(prediction_smoothness(model, eval_set)),
    })
    write_json(out_dir / METRICS_FILE, metrics)
    if report.single_class:
        logger.warning(f"Eval labels hold a single class; {out_dir / 'roc.csv'} not written")
    else:
        write_roc_csv(roc_curve(scores, truth), out_dir / "roc.csv")
    table = format_table([name], [report])
    (out_dir / "report.txt").write_text(table)
    _echo_config(config, out_dir)

    print(table, end="")
    return EXIT_OK


def cmd_gradcheck(config: Config) -> int:
    """Verify analytic gradients against finite differences."""
    gradcheck_config = GradcheckConfig.from_config(config)
    perturb = float(config.get("run.perturb_weights") or 1.0)
    report = run_gradcheck(gradcheck_config, perturb_weights=perturb)
    for line in report.summary_lines():
        print(line)

    out_dir = config.get("run.out")
    if out_dir:
        write_json(Path(out_dir) / "gradcheck.json", report.to_dict())
        _echo_config(config, out_dir)

    report.raise_on_failure()
    print(f"All {len(report.blocks)} gradient blocks within tolerance")
    return EXIT_OK


def _names_for(entries: List[Dict[str, Any]], paths: Sequence[str], names: Optional[Sequence[str]]) -> List[str]:
    if names:
        if len(names) != len(entries):
            raise UsageError(f"--names lists {len(names)} names for {len(entries)} metrics files")
        return list(names)
    return [entry.get("model_name") or Path(path).stem for entry, path in zip(entries, paths)]


def _render_metrics(entries: List[Dict[str, Any]], names: List[str]) -> str:
    text = format_table(names, [MetricsReport.from_dict(entry) for entry in entries])
    if all("smoothness" in entry for entry in entries):
        text += "\n" + format_smoothness_table(names, [entry["smoothness"] for entry in entries])
    return text


def cmd_compare(config: Config) -> int:
    """Side-by-side report of two evaluations of the same eval set."""
    paths = list(config.get("run.metrics") or [])
    if len(paths) != 2:
        raise UsageError(f"compare needs exactly two metrics files, got {len(paths)}")
    entries = [read_metrics(p) for p in paths]
    fingerprints = {entry.get("eval_fingerprint") for entry in entries}
    if len(fingerprints) > 1:
        raise UsageError("metrics were computed on different evaluation sets")

    text = _render_metrics(entries, _names_for(entries, paths, config.get("run.names")))
    out_dir = config.get("run.out")
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "compare.txt").write_text(text)
        _echo_config(config, out_dir)
    print(text, end="")
    return EXIT_OK


def cmd_report(config: Config) -> int:
    """Render any number of metrics files as one table."""
    paths = list(config.get("run.metrics") or [])
    if not paths:
        raise UsageError("report needs at least one metrics file")
    entries = [read_metrics(p) for p in paths]

    text = _render_metrics(entries, _names_for(entries, paths, config.get("run.names")))
    out_dir = config.get("run.out")
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "report.txt").write_text(text)
        _echo_config(config, out_dir)
    print(text, end="")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Config], int]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "compare": cmd_compare,
    "report": cmd_report,
}


__all__ = [
    "COMMANDS",
    "write_json",
    "read_metrics",
    "calibrate",
    "eval_fingerprint",
    "smoothness_stats",
    "cmd_gen_data",
    "cmd_train",
    "cmd_eval",
    "cmd_gradcheck",
    "cmd_compare",
    "cmd_report",
]
