"""Adam plus early stopping and learning-rate plateau reduction."""

from __future__ import annotations

import math

import numpy as np

from .errors import OutOfOrderEpoch, ShapeMismatch

CONTINUE = "continue"
STOP = "stop"


class Adam:
    """Adam with bias correction; epsilon is added outside the square root.

    Defaults are the usual framework values: lr 1e-3, betas (0.9, 0.999),
    eps 1e-7. Parameters are updated in place.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-7):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict):
        for k, g in grads.items():
            if k not in params or params[k].shape != g.shape:
                raise ShapeMismatch(f"gradient {k} of shape {g.shape} has no matching parameter")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            p = params[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v / bc2)
            denom += self.eps
            p -= (self.lr / bc1) * m / denom


def adam_step(params: dict, grads: dict, state: Adam) -> Adam:
    state.step(params, grads)
    return state


class EarlyStopping:
    """Stop once validation accuracy has not strictly improved for ``patience`` epochs.

    The best weights snapshot is kept so the trainer can restore it.
    """

    def __init__(self, patience=4):
        self.patience = patience
        self.best_val_accuracy = -math.inf
        self.best_epoch = None
        self.best_weights = None
        self.epochs_since_improvement = 0
        self.last_epoch = 0

    def update(self, epoch: int, val_accuracy: float, weights_snapshot=None) -> str:
        if epoch != self.last_epoch + 1:
            raise OutOfOrderEpoch(f"expected epoch {self.last_epoch + 1}, got {epoch}")
        self.last_epoch = epoch
        if val_accuracy > self.best_val_accuracy:
            self.best_val_accuracy = val_accuracy
            self.best_epoch = epoch
            self.best_weights = weights_snapshot() if callable(weights_snapshot) else weights_snapshot
            self.epochs_since_improvement = 0
            return CONTINUE
        self.epochs_since_improvement += 1
        return STOP if self.epochs_since_improvement >= self.patience else CONTINUE


class ReduceLROnPlateau:
    """Scale the learning rate by ``factor`` after ``patience`` epochs without
    a validation-loss improvement larger than ``min_delta``; never below ``min_lr``.
    The wait counter restarts after every reduction.
    """

    def __init__(self, patience=3, factor=0.5, min_lr=1e-6, min_delta=1e-4):
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.min_delta = min_delta
        self.best_val_loss = math.inf
        self.epochs_since_improvement = 0
        self.last_epoch = 0

    def update(self, epoch: int, val_loss: float, current_lr: float) -> float:
        if epoch != self.last_epoch + 1:
            raise OutOfOrderEpoch(f"expected epoch {self.last_epoch + 1}, got {epoch}")
        self.last_epoch = epoch
        if val_loss < self.best_val_loss - self.min_delta:
            self.best_val_loss = val_loss
            self.epochs_since_improvement = 0
            return current_lr
        self.best_val_loss = min(self.best_val_loss, val_loss)
        self.epochs_since_improvement += 1
        if self.epochs_since_improvement >= self.patience:
            self.epochs_since_improvement = 0
            return max(current_lr * self.factor, self.min_lr)
        return current_lr


def early_stopping_update(state: EarlyStopping, epoch, val_accuracy, weights_snapshot=None) -> str:
    return state.update(epoch, val_accuracy, weights_snapshot)


def plateau_lr_update(state: ReduceLROnPlateau, epoch, val_loss, current_lr) -> float:
    return state.update(epoch, val_loss, current_lr)
