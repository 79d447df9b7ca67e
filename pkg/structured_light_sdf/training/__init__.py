"""Losses, optimizer and the training loop"""

from .losses import loss_rc, loss_reg, loss_sc
from .optimizer import Adam
from .trainer import LOG_COLUMNS, Trainer, TrainState, add_pattern, create_state, train_step

__all__ = [
    "loss_rc", "loss_sc", "loss_reg", "Adam", "Trainer", "TrainState", "add_pattern",
    "create_state", "train_step", "LOG_COLUMNS",
]
