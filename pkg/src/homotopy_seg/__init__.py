"""
homotopy-seg - Homotopy-based multi-objective fine-tuning for binary segmentation

Trains a segmentation model on a loss that moves linearly from DiceCE
(pixel accuracy) towards a spatial smoothness penalty, evaluates it with
ROC/AUC/EER, Jaccard and Dice, and generates synthetic aerial scenes with
simulated brush-annotation artifacts to train on.
"""

__version__ = "1.0.0"
__description__ = "Homotopy-based multi-objective segmentation fine-tuning"

from .core.model import SegModel, init_model
from .core.trainer import HomotopyTrainer, train, evaluate
from .utils.config import Config

__all__ = [
    "SegModel",
    "init_model",
    "HomotopyTrainer",
    "train",
    "evaluate",
    "Config",
    "__version__",
    "__description__",
]
