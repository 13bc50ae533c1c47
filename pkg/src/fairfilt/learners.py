"""Downstream learners the filters plug into.

Two pipelines from the evaluation protocol: a two-layer graph convolutional
network where the designed filter acts as a fixed sublayer before either or
both layers (pre-processing), and label propagation whose soft outputs get
filtered before thresholding (post-processing).

The GCN is trained full-batch with plain gradient descent and manual
backpropagation. Everything is seeded through numpy Generators, so a fixed
seed and config reproduce runs bitwise on one platform.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .design import FilterSpec
from .errors import DimensionMismatch, DomainError, EmptyClass, NonFiniteLoss
from .filtering import apply_frequency
from .graph import NormalizedOperators, _freeze
from .spectral import SpectralDecomposition

PLACEMENTS = ("pre1", "pre2", "both", "none")


@dataclass(frozen=True)
class GcnConfig:
    """Training hyperparameters for the two-layer GCN."""

    hidden: int = 64
    learning_rate: float = 0.01
    epochs: int = 300
    weight_decay: float = 1e-5
    seed: int = 0


@dataclass(frozen=True)
class GcnModel:
    """Trained two-layer GCN with its filter placement and training curve.

    ``curve`` rows are (epoch, loss, train_acc, val_acc); val_acc is NaN
    when no validation split was given.
    """

    w1: np.ndarray
    w2: np.ndarray
    placement: str
    config: GcnConfig
    curve: tuple[tuple[float, float, float, float], ...]


def _filter_or_identity(spec, filt, mat, active: bool) -> np.ndarray:
    if filt is None or not active:
        return mat
    return apply_frequency(spec, filt, mat)


def _forward(ops, spec, features, w1, w2, filt, placement):
    """Forward pass; returns intermediates needed for backprop."""
    filtered_in = _filter_or_identity(spec, filt, features, placement in ("pre1", "both"))
    agg1 = ops.a_hat @ filtered_in
    pre1 = agg1 @ w1
    hidden = np.maximum(pre1, 0.0)
    filtered_hidden = _filter_or_identity(spec, filt, hidden, placement in ("pre2", "both"))
    agg2 = ops.a_hat @ filtered_hidden
    logits = agg2 @ w2
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return filtered_in, agg1, pre1, agg2, logits, probs


def _loss_and_grads(ops, spec, features, labels01, train_idx, w1, w2, filt, placement,
                    weight_decay):
    """Negative log-likelihood on the train nodes plus L2 penalty; analytic grads."""
    filtered_in, agg1, pre1, agg2, _, probs = _forward(
        ops, spec, features, w1, w2, filt, placement)
    count = train_idx.shape[0]
    loss = -np.mean(np.log(probs[train_idx, labels01[train_idx]] + 1e-300))
    loss += 0.5 * weight_decay * (np.sum(w1 ** 2) + np.sum(w2 ** 2))

    dlogits = np.zeros_like(probs)
    dlogits[train_idx] = probs[train_idx]
    dlogits[train_idx, labels01[train_idx]] -= 1.0
    dlogits /= count

    dw2 = agg2.T @ dlogits + weight_decay * w2
    dfiltered_hidden = ops.a_hat @ (dlogits @ w2.T)
    dhidden = _filter_or_identity(spec, filt, dfiltered_hidden,
                                  placement in ("pre2", "both"))
    dpre1 = dhidden * (pre1 > 0.0)
    dw1 = agg1.T @ dpre1 + weight_decay * w1
    return float(loss), dw1, dw2, probs


def _glorot(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def train_gcn(ops: NormalizedOperators, spec: SpectralDecomposition, signals, split,
              cfg: GcnConfig, filt: FilterSpec | None = None,
              placement: str = "both") -> tuple[GcnModel, np.ndarray]:
    """Train the two-layer GCN for binary node classification.

    Args:
        ops: Normalized graph operators.
        spec: Spectral decomposition (needed only when a filter is placed).
        signals: SignalSet with features and labels.
        split: (train_idx, val_idx, test_idx) index arrays; val may be empty.
        cfg: Training hyperparameters.
        filt: Optional pre-trained filter applied per ``placement``.
        placement: "pre1", "pre2", "both", or "none".

    Returns:
        (model, predictions) with predictions over all nodes in {-1, +1}.
    """
    if placement not in PLACEMENTS:
        raise DomainError(f"placement must be one of {PLACEMENTS}, got {placement!r}")
    features = np.asarray(signals.features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != ops.n or features.shape[1] < 1:
        raise DimensionMismatch(f"features shape {features.shape} incompatible with n={ops.n}")
    train_idx = np.asarray(split[0], dtype=np.int64)
    val_idx = np.asarray(split[1], dtype=np.int64)
    if train_idx.size == 0:
        raise EmptyClass("empty training split")
    labels = np.asarray(signals.y, dtype=np.int64)
    if np.any(labels[train_idx] == 0) or (val_idx.size and np.any(labels[val_idx] == 0)):
        raise DomainError("train/val nodes must be labeled")
    labels01 = ((labels + 1) // 2).astype(np.int64)
    train_labels = labels01[train_idx]
    if not (np.any(train_labels == 0) and np.any(train_labels == 1)):
        raise EmptyClass("training split must contain both classes")

    rng = np.random.default_rng(cfg.seed)
    w1 = _glorot(rng, features.shape[1], cfg.hidden)
    w2 = _glorot(rng, cfg.hidden, 2)

    curve = []
    for epoch in range(cfg.epochs):
        loss, dw1, dw2, probs = _loss_and_grads(
            ops, spec, features, labels01, train_idx, w1, w2, filt, placement,
            cfg.weight_decay)
        if not np.isfinite(loss):
            raise NonFiniteLoss(epoch)
        guess = probs.argmax(axis=1)
        train_acc = float(np.mean(guess[train_idx] == labels01[train_idx]))
        val_acc = float(np.mean(guess[val_idx] == labels01[val_idx])) if val_idx.size else float("nan")
        curve.append((float(epoch), loss, train_acc, val_acc))
        w1 = w1 - cfg.learning_rate * dw1
        w2 = w2 - cfg.learning_rate * dw2

    model = GcnModel(w1=_freeze(w1), w2=_freeze(w2), placement=placement, config=cfg,
                     curve=tuple(curve))
    *_, probs = _forward(ops, spec, features, w1, w2, filt, placement)
    predictions = np.where(probs.argmax(axis=1) == 1, 1, -1)
    return model, predictions


def gcn_scores(model: GcnModel, ops: NormalizedOperators, spec: SpectralDecomposition,
               signals, filt: FilterSpec | None = None) -> np.ndarray:
    """Soft scores in [-1, 1]: probability margin of the positive class."""
    features = np.asarray(signals.features, dtype=np.float64)
    *_, probs = _forward(ops, spec, features, model.w1, model.w2, filt, model.placement)
    return probs[:, 1] - probs[:, 0]


@dataclass(frozen=True)
class LabelPropConfig:
    """Diffusion parameters for label propagation.

    ``alpha`` weighs the neighbor average against the seed labels; labeled
    nodes are soft-updated unless ``clamp_labeled`` is set.
    """

    alpha: float = 0.9
    max_iter: int = 1000
    tol: float = 1e-6
    threshold: float = 0.0
    clamp_labeled: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class LabelPropResult:
    """Diffusion output; ``converged`` is False when the iteration cap hit."""

    scores: np.ndarray
    iterations: int
    converged: bool


def label_propagation(ops: NormalizedOperators, y_seed,
                      cfg: LabelPropConfig = LabelPropConfig()) -> LabelPropResult:
    """Diffuse partial labels over the graph.

    ``y_seed`` holds -1/+1 for labeled nodes and 0 for unlabeled ones; at
    least one node must be labeled (classification callers additionally
    want both classes seeded, but single-class diffusion is well defined).
    Iterates scores <- alpha * A_hat . scores + (1 - alpha) * y_seed until
    the max-norm update falls below cfg.tol.
    """
    seed = np.asarray(y_seed, dtype=np.float64)
    if seed.shape != (ops.n,):
        raise DimensionMismatch(f"seed labels shape {seed.shape} != ({ops.n},)")
    if not np.all(np.isin(seed, (-1.0, 0.0, 1.0))):
        raise DomainError("seed labels must be -1, 0, or 1")
    if not np.any(seed != 0.0):
        raise EmptyClass("need at least one labeled node")

    labeled = seed != 0.0
    scores = seed.copy()
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        updated = cfg.alpha * (ops.a_hat @ scores) + (1.0 - cfg.alpha) * seed
        if cfg.clamp_labeled:
            updated[labeled] = seed[labeled]
        delta = float(np.max(np.abs(updated - scores)))
        scores = updated
        if delta < cfg.tol:
            converged = True
            break
    return LabelPropResult(scores=_freeze(scores), iterations=iterations, converged=converged)


def postprocess_predictions(spec: SpectralDecomposition, filt: FilterSpec, soft_scores,
                            threshold: float = 0.0) -> np.ndarray:
    """Filter soft scores, then threshold into hard {-1, +1} labels."""
    filtered = apply_frequency(spec, filt, soft_scores)
    return np.where(filtered > threshold, 1, -1)


def write_predictions_csv(path, y_hat, soft_scores) -> None:
    """Serialize per-node predictions with the fixed 3-column header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "y_hat", "soft_score"])
        for node, (label, score) in enumerate(zip(y_hat, soft_scores)):
            writer.writerow([node, int(label), repr(float(score))])


def write_curve_csv(path, curve) -> None:
    """Serialize a training curve with the fixed 4-column header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_acc", "val_acc"])
        for epoch, loss, train_acc, val_acc in curve:
            writer.writerow([int(epoch), repr(float(loss)), repr(float(train_acc)),
                             repr(float(val_acc))])
