"""Bias and fairness metrics.

The central quantity is the bias metric: the 2-norm of the sensitive
attribute's correlation with the effective aggregation operator that a
graph filter induces. Because the Laplacian eigenvectors are orthonormal,
that norm collapses to a per-frequency sum, which is what every design in
:mod:`fairfilt.design` exploits; the dense matrix-product form is kept as
the reference implementation the separable one is tested against.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptyGroup
from .graph import _freeze
from .spectral import SpectralDecomposition, gft

RESPONSE_TOL = 1e-9


@dataclass(frozen=True)
class BiasContext:
    """Precomputed per-frequency quantities for one (graph, s) pair.

    Attributes:
        s_tilde: GFT of the sensitive attribute.
        eigenvalues: Laplacian eigenvalues, ascending.
        weights: |s_tilde_i| * |1 - eigenvalue_i|; the coefficients of the
            separable bias metric and of its upper bound.
        n: Node count.
    """

    s_tilde: np.ndarray
    eigenvalues: np.ndarray
    weights: np.ndarray
    n: int


def bias_context(spec: SpectralDecomposition, s) -> BiasContext:
    """Build the per-frequency bias coefficients for a sensitive signal."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (spec.n,):
        raise DimensionMismatch(f"sensitive signal shape {s.shape} != ({spec.n},)")
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise DomainError("sensitive attribute entries must be -1 or 1")
    s_tilde = gft(spec, s)
    weights = np.abs(s_tilde) * np.abs(1.0 - spec.eigenvalues)
    return BiasContext(
        s_tilde=_freeze(s_tilde),
        eigenvalues=spec.eigenvalues,
        weights=_freeze(weights),
        n=spec.n,
    )


def check_response(response, n: int) -> np.ndarray:
    """Validate a frequency response: length n, inside [0, 1] up to round-off."""
    response = np.asarray(response, dtype=np.float64)
    if response.shape != (n,):
        raise DimensionMismatch(f"frequency response shape {response.shape} != ({n},)")
    if np.min(response) < -RESPONSE_TOL or np.max(response) > 1.0 + RESPONSE_TOL:
        raise DomainError(
            f"frequency response outside [0, 1]: range "
            f"[{np.min(response):.3e}, {np.max(response):.3e}]"
        )
    return response


def bias_metric_dense(spec: SpectralDecomposition, s, response) -> float:
    """Reference implementation of the bias metric via explicit dense products.

    Materializes the effective aggregation operator
    V (I - Lambda) diag(response) V^T and returns ||s^T . operator||_2.
    """
    response = check_response(response, spec.n)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (spec.n,):
        raise DimensionMismatch(f"sensitive signal shape {s.shape} != ({spec.n},)")
    if not np.all(np.isin(s, (-1.0, 1.0))):
        raise DomainError("sensitive attribute entries must be -1 or 1")
    v = spec.eigenvectors
    inner = np.diag(1.0 - spec.eigenvalues) @ np.diag(response)
    operator = v @ inner @ v.T
    return float(np.linalg.norm(s @ operator))


def bias_metric(ctx: BiasContext, response) -> float:
    """Separable form of the bias metric: sqrt(sum_i (weights_i * response_i)^2).

    Equals :func:`bias_metric_dense` because right-multiplying by the
    orthonormal eigenvector matrix preserves the 2-norm.
    """
    response = check_response(response, ctx.n)
    return float(np.linalg.norm(ctx.weights * response))


def bias_metric_upper_bound(ctx: BiasContext, response) -> float:
    """Analytic upper bound on the bias metric: sqrt(n) * sum_i weights_i * |response_i|."""
    response = check_response(response, ctx.n)
    return float(np.sqrt(ctx.n) * np.sum(ctx.weights * np.abs(response)))


def total_correlation(s, reps, mode: str = "pearson") -> float:
    """Total linear correlation between the sensitive attribute and representations.

    mode "inner" returns sum_j |s^T reps[:, j]|; mode "pearson" returns
    sum_j |pearson(s, reps[:, j])| with zero-variance columns contributing 0.
    """
    s = np.asarray(s, dtype=np.float64)
    reps = np.asarray(reps, dtype=np.float64)
    if reps.ndim == 1:
        reps = reps[:, None]
    if reps.ndim != 2 or s.ndim != 1 or reps.shape[0] != s.shape[0]:
        raise DimensionMismatch(
            f"representations shape {reps.shape} incompatible with signal length {s.shape}"
        )
    if mode == "inner":
        return float(np.sum(np.abs(s @ reps)))
    if mode != "pearson":
        raise DomainError(f"unknown mode {mode!r}; expected 'inner' or 'pearson'")
    s_centered = s - s.mean()
    s_norm = np.linalg.norm(s_centered)
    if s_norm == 0.0:
        raise DomainError("sensitive attribute has zero variance")
    centered = reps - reps.mean(axis=0, keepdims=True)
    col_norms = np.linalg.norm(centered, axis=0)
    live = col_norms > 0.0
    corr = np.abs(s_centered @ centered[:, live]) / (s_norm * col_norms[live])
    return float(np.sum(corr))


@dataclass(frozen=True)
class EvalReport:
    """Utility and group-fairness metrics for one prediction run.

    ``cells`` holds the raw empirical counts the rate gaps were computed
    from: 4 keys over (s, yhat) and 8 keys over (s, y, yhat).
    """

    accuracy: float
    delta_sp: float
    delta_eo: float
    cells: dict[str, int] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "delta_sp": self.delta_sp,
            "delta_eo": self.delta_eo,
            "cells": dict(self.cells),
        }


def _as_pm_one(name: str, arr, n: int | None) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 1 or (n is not None and arr.shape != (n,)):
        raise DimensionMismatch(f"{name} shape {arr.shape} incompatible")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise DomainError(f"{name} entries must be -1 or 1")
    return arr


def group_fairness(y_hat, y, s) -> EvalReport:
    """Accuracy plus statistical-parity and equal-opportunity gaps.

    Probabilities are raw empirical frequencies; an empty conditioning cell
    raises EmptyGroup rather than silently counting as zero.
    """
    y_hat = _as_pm_one("y_hat", y_hat, None)
    y = _as_pm_one("y", y, y_hat.shape[0])
    s = _as_pm_one("s", s, y_hat.shape[0])

    cells: dict[str, int] = {}
    for s_val in (-1, 1):
        for yh_val in (-1, 1):
            mask = (s == s_val) & (y_hat == yh_val)
            cells[f"s={s_val},yhat={yh_val}"] = int(mask.sum())
            for y_val in (-1, 1):
                full = mask & (y == y_val)
                cells[f"s={s_val},y={y_val},yhat={yh_val}"] = int(full.sum())

    def positive_rate(s_val: int) -> float:
        group = cells[f"s={s_val},yhat=-1"] + cells[f"s={s_val},yhat=1"]
        if group == 0:
            raise EmptyGroup(f"s={s_val}")
        return cells[f"s={s_val},yhat=1"] / group

    def true_positive_rate(s_val: int) -> float:
        group = cells[f"s={s_val},y=1,yhat=-1"] + cells[f"s={s_val},y=1,yhat=1"]
        if group == 0:
            raise EmptyGroup(f"s={s_val},y=1")
        return cells[f"s={s_val},y=1,yhat=1"] / group

    delta_sp = abs(positive_rate(-1) - positive_rate(1))
    delta_eo = abs(true_positive_rate(-1) - true_positive_rate(1))
    accuracy = float(np.mean(y_hat == y))
    return EvalReport(accuracy=accuracy, delta_sp=delta_sp, delta_eo=delta_eo, cells=cells)
