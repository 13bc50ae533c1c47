"""Filter application and the effective aggregation operator.

Frequency-domain application multiplies each GFT coefficient by the
response; vertex-domain application of a polynomial filter runs Horner-style
repeated multiplications by the normalized adjacency, never forming its
powers. ``effective_operator`` materializes the aggregation matrix the
downstream learner effectively uses once signals are filtered before
neighborhood aggregation, and splits its absolute weights into same-group
and cross-group totals (signed weights would let cancellation fake balance).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import FilterSpec
from .errors import DimensionMismatch
from .graph import NormalizedOperators, _freeze
from .spectral import SpectralDecomposition


@dataclass(frozen=True)
class EffectiveOperator:
    """Aggregation operator induced by filtering, with intra/inter weight split.

    Diagonal entries are excluded from both totals.
    """

    matrix: np.ndarray
    intra_weight: float
    inter_weight: float

    def to_dict(self) -> dict:
        return {"intra_weight": self.intra_weight, "inter_weight": self.inter_weight}


def _check_signals(n: int, signals) -> tuple[np.ndarray, bool]:
    signals = np.asarray(signals, dtype=np.float64)
    was_vector = signals.ndim == 1
    if was_vector:
        signals = signals[:, None]
    if signals.ndim != 2 or signals.shape[0] != n:
        raise DimensionMismatch(f"signals shape {signals.shape} incompatible with n={n}")
    return signals, was_vector


def apply_frequency(spec: SpectralDecomposition, filt: FilterSpec, signals) -> np.ndarray:
    """Filter node signals in the frequency domain (columns independently)."""
    if filt.response.shape != (spec.n,):
        raise DimensionMismatch(
            f"filter length {filt.response.shape} != graph size ({spec.n},)")
    mat, was_vector = _check_signals(spec.n, signals)
    spectrum = spec.eigenvectors.T @ mat
    out = spec.eigenvectors @ (filt.response[:, None] * spectrum)
    return out[:, 0] if was_vector else out


def apply_vertex_polynomial(ops: NormalizedOperators, coeffs, signals) -> np.ndarray:
    """Apply a polynomial filter by repeated neighbor aggregation.

    ``coeffs`` are monomial-basis coefficients (h_0 ... h_{L-1}); computes
    sum_l h_l A_hat^l . signals by Horner accumulation.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.shape[0] < 1:
        raise DimensionMismatch(f"coefficients shape {coeffs.shape} invalid")
    mat, was_vector = _check_signals(ops.n, signals)
    acc = coeffs[-1] * mat
    for level in range(len(coeffs) - 2, -1, -1):
        acc = ops.a_hat @ acc + coeffs[level] * mat
    return acc[:, 0] if was_vector else acc


def effective_operator(spec: SpectralDecomposition, filt: FilterSpec, s) -> EffectiveOperator:
    """Materialize V (I - Lambda) diag(response) V^T and split its weights by group."""
    if filt.response.shape != (spec.n,):
        raise DimensionMismatch(
            f"filter length {filt.response.shape} != graph size ({spec.n},)")
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (spec.n,):
        raise DimensionMismatch(f"sensitive signal shape {s.shape} != ({spec.n},)")
    gains = (1.0 - spec.eigenvalues) * filt.response
    matrix = (spec.eigenvectors * gains[None, :]) @ spec.eigenvectors.T
    magnitude = np.abs(matrix)
    same_group = np.equal.outer(s, s)
    off_diagonal = ~np.eye(spec.n, dtype=bool)
    intra = float(np.sum(magnitude[same_group & off_diagonal]))
    inter = float(np.sum(magnitude[~same_group]))
    return EffectiveOperator(matrix=_freeze(matrix), intra_weight=intra, inter_weight=inter)
