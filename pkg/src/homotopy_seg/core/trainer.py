"""
Homotopy training and evaluation.

HomotopyTrainer runs batched training in which every step blends the
DiceCE and smoothness objectives with the current homotopy parameter t,
then advances t and the learning rate along their linear schedules.
Single-objective mode pins t at 0 (pure DiceCE).
"""

import logging
import math
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..data.models import (
    HISTORY_COLUMNS,
    HistoryRecord,
    MetricsReport,
    Patch,
    ScoreScaler,
    TrainConfig,
    TrainHistory,
)
from ..data.synthdata import augment
from ..utils.exceptions import NumericalAbortError, ShapeError, UsageError
from .losses import loss_components, loss_gradients, smoothness_loss
from .metrics import apply_scaler, build_report
from .model import (
    AdamState,
    SegModel,
    adam_step,
    backward,
    forward,
    predict,
    save_checkpoint,
    zero_gradients,
)
from .schedule import HomotopySchedule

logger = logging.getLogger(__name__)


def _check_dataset(patches: Sequence[Patch], what: str) -> Tuple[int, int]:
    if len(patches) == 0:
        raise UsageError(f"{what} is empty")
    shape = patches[0].shape
    for patch in patches:
        if patch.shape != shape:
            raise ShapeError(f"{what} mixes patch sizes {shape} and {patch.shape}")
    return shape


class HomotopyTrainer:
    """Runs one training job over an in-memory patch collection."""

    def __init__(self, config: TrainConfig, model: SegModel,
                 state: Optional[AdamState] = None,
                 checkpoint_dir: Optional[Union[str, Path]] = None):
        """Initialize the trainer.

        Args:
            config: Training settings
            model: Initial model; it is copied, never modified
            state: Optimizer state to resume from; fresh if None
            checkpoint_dir: Where per-epoch checkpoints go; none written if None
        """
        self.config = config
        self.model = model.copy()
        self.state = state if state is not None else AdamState.for_model(self.model)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.history = TrainHistory()

    def _batch_order(self, epoch: int, n: int) -> np.ndarray:
        return np.random.default_rng([self.config.seed, epoch]).permutation(n)

    def _step(self, batch: List[Patch], step: int, t: float) -> Tuple[float, float, float, dict]:
        """Forward, loss and accumulated gradients of one batch."""
        loss_cfg = self.config.loss
        grads = zero_gradients(self.model)
        dicece_values, smooth_values, combined_values = [], [], []
        scale = 1.0 / len(batch)

        # Gradients are summed in batch order
        for position, patch in enumerate(batch):
            image, mask = patch.image, patch.mask
            if self.config.augment:
                image, mask = augment(image, mask, seed=[self.config.seed, step, position])
            prob, cache = forward(self.model, image)
            dicece, smooth, combined = loss_components(prob, mask, t, loss_cfg)
            dicece_values.append(dicece)
            smooth_values.append(smooth)
            combined_values.append(combined)

            upstream = loss_gradients(prob, mask, t, loss_cfg) * scale
            for name, grad in backward(self.model, cache, upstream).items():
                grads[name] += grad

        return (float(np.mean(dicece_values)), float(np.mean(smooth_values)),
                float(np.mean(combined_values)), grads)

    def run(self, train_set: Sequence[Patch]) -> Tuple[SegModel, TrainHistory]:
        """Train for the configured number of epochs.

        Returns:
            (trained model, complete history)
        """
        _check_dataset(train_set, "training set")
        config = self.config
        n = len(train_set)
        batches_per_epoch = math.ceil(n / config.batch_size)
        schedule = HomotopySchedule(
            epochs=config.epochs,
            steps_per_epoch=batches_per_epoch,
            alpha_start=config.alpha_start,
            alpha_end=config.alpha_end,
            t_max=config.t_max,
            granularity=config.t_granularity,
            frozen=config.single_objective,
        )
        logger.info(
            f"Training {config.mode}: {n} patches, {config.epochs} epochs x "
            f"{batches_per_epoch} batches = {schedule.total_steps} steps"
        )

        for epoch in range(config.epochs):
            started = time.perf_counter()
            order = self._batch_order(epoch, n)
            for b in range(batches_per_epoch):
                step = epoch * batches_per_epoch + b + 1
                t, alpha = schedule.t, schedule.alpha
                batch = [train_set[i] for i in order[b * config.batch_size:(b + 1) * config.batch_size]]

                dicece, smooth, combined, grads = self._step(batch, step, t)
                if not all(math.isfinite(v) for v in (dicece, smooth, combined)):
                    raise NumericalAbortError(
                        f"nonfinite loss at step {step}",
                        step=step,
                        components={"dicece": dicece, "smooth": smooth, "combined": combined},
                    )
                adam_step(self.model, grads, self.state, alpha)

                self.history.records.append(HistoryRecord(
                    step=step, epoch=epoch + 1, t=t, alpha=alpha,
                    dicece=dicece, smooth=smooth, combined=combined,
                ))
                logger.debug(
                    f"step {step}: t={t:.4f} alpha={alpha:.3g} dicece={dicece:.6f} "
                    f"smooth={smooth:.6f} combined={combined:.6f}"
                )
                schedule.advance()

            elapsed = time.perf_counter() - started
            self.history.epoch_seconds.append(elapsed)
            last = self.history.records[-1]
            logger.info(
                f"Epoch {epoch + 1}/{config.epochs} done in {elapsed:.2f}s: "
                f"combined={last.combined:.6f} t={schedule.t:.4f}"
            )
            if self.checkpoint_dir is not None:
                path = save_checkpoint(self.checkpoint_dir / f"epoch_{epoch + 1:03d}.ckpt",
                                       self.model, self.state)
                logger.info(f"Checkpoint written: {path}")

        self.history.final_t = schedule.t
        self.history.final_alpha = schedule.alpha
        return self.model, self.history


def train(config: TrainConfig, train_set: Sequence[Patch], model: SegModel,
          checkpoint_dir: Optional[Union[str, Path]] = None) -> Tuple[SegModel, TrainHistory]:
    """Run homotopy training and return the trained model and its history."""
    return HomotopyTrainer(config, model, checkpoint_dir=checkpoint_dir).run(train_set)


def write_history_csv(history: TrainHistory, path: Union[str, Path]) -> Path:
    """Write the per-step history with header step,epoch,t,alpha,dicece,smooth,combined."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(history.to_rows(), columns=HISTORY_COLUMNS).to_csv(path, index=False)
    return path


def read_history_csv(path: Union[str, Path]) -> TrainHistory:
    """Load a history written by write_history_csv."""
    frame = pd.read_csv(path)
    missing = [c for c in HISTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise UsageError(f"history {path} lacks columns {missing}")
    records = [
        HistoryRecord(step=int(row.step), epoch=int(row.epoch), t=float(row.t), alpha=float(row.alpha),
                      dicece=float(row.dicece), smooth=float(row.smooth), combined=float(row.combined))
        for row in frame.itertuples(index=False)
    ]
    return TrainHistory(records=records)


def predict_scores(model: SegModel, patches: Sequence[Patch]) -> Tuple[np.ndarray, np.ndarray]:
    """Raw per-pixel scores and labels of every patch, concatenated in order."""
    _check_dataset(patches, "patch set")
    scores = [predict(model, p.image).ravel() for p in patches]
    labels = [np.asarray(p.mask, dtype=np.uint8).ravel() for p in patches]
    return np.concatenate(scores), np.concatenate(labels)


def prediction_smoothness(model: SegModel, patches: Sequence[Patch]) -> np.ndarray:
    """Per-patch smoothness of predictions (lambda = 1, normalized per pair)."""
    _check_dataset(patches, "patch set")
    return np.array([smoothness_loss(predict(model, p.image), 1.0, normalize=True) for p in patches])


def evaluate(model: SegModel, eval_set: Sequence[Patch], threshold: float,
             scaler: Optional[ScoreScaler] = None) -> MetricsReport:
    """Metrics of a model over a whole evaluation set.

    Args:
        model: Trained model
        eval_set: Patches with masks; pixel counts are pooled over the set
        threshold: Decision threshold applied to (normalized) scores
        scaler: Score normalization fitted on calibration data; raw
            scores are used if None

    Returns:
        MetricsReport
    """
    if len(eval_set) == 0:
        raise UsageError("evaluation set is empty")
    scores, labels = predict_scores(model, eval_set)
    if scaler is not None:
        scores = apply_scaler(scaler, scores)
    return build_report(scores, labels, threshold)


__all__ = [
    "HomotopyTrainer",
    "train",
    "write_history_csv",
    "read_history_csv",
    "predict_scores",
    "prediction_smoothness",
    "evaluate",
]
