"""
Numerical core for homotopy-seg.

This package contains the loss functions and their gradients, the
segmentation model with its optimizer, the homotopy schedules, the
trainer, evaluation metrics and gradient verification.
"""

from .losses import combined_loss, loss_components, loss_gradients
from .model import SegModel, AdamState, init_model, save_checkpoint, load_checkpoint
from .schedule import HomotopySchedule, homotopy_t, linear_lr
from .trainer import HomotopyTrainer, train, evaluate
from .metrics import build_report, roc_curve, auc, eer
from .gradcheck import run_gradcheck

__all__ = [
    "combined_loss",
    "loss_components",
    "loss_gradients",
    "SegModel",
    "AdamState",
    "init_model",
    "save_checkpoint",
    "load_checkpoint",
    "HomotopySchedule",
    "homotopy_t",
    "linear_lr",
    "HomotopyTrainer",
    "train",
    "evaluate",
    "build_report",
    "roc_curve",
    "auc",
    "eer",
    "run_gradcheck",
]
