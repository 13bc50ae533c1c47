"""Eigendecomposition of the normalized Laplacian and the graph Fourier transform.

The eigensolver is a cyclic Jacobi sweep over symmetric rotations: slow in
raw flops compared to LAPACK but unconditionally stable, trivially
deterministic, and fully under our control. The inner sweeps are JIT
compiled; rotation order and arithmetic are fixed, so repeated runs on the
same input are bitwise identical.

Eigenvector sign ambiguity is resolved by making each column's
largest-magnitude entry positive (ties broken by lowest index). Within a
degenerate eigenspace no particular basis is enforced; every quantity
exported downstream depends on the eigenspace only through magnitudes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceFailure, DimensionMismatch, DomainError
from .graph import NormalizedOperators, _freeze


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of the normalized Laplacian.

    Attributes:
        eigenvalues: Ascending eigenvalues, length n.
        eigenvectors: Orthonormal matrix; column i pairs with eigenvalue i.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@njit(cache=True)
def _offdiag_norm(a):
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += a[i, j] * a[i, j]
    return np.sqrt(total)


@njit(cache=True)
def _jacobi_sweeps(a, v, tol, skip, max_sweeps):
    """Cyclic Jacobi rotations in fixed (p, q) row order.

    Rotations with |a_pq| <= skip are skipped; with skip = tol / (2n) the
    skipped mass alone can never hold the off-diagonal norm above tol.
    Returns (sweeps_used, final_off_diagonal_norm).
    """
    n = a.shape[0]
    sweeps = 0
    off = _offdiag_norm(a)
    while off > tol and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
        sweeps += 1
        off = _offdiag_norm(a)
    return sweeps, off


def decompose(ops: NormalizedOperators, tol_factor: float = 1e-10,
              max_sweeps: int = 100) -> SpectralDecomposition:
    """Diagonalize the normalized Laplacian.

    Converges when the off-diagonal Frobenius norm falls below
    tol_factor * ||L||_F; raises ConvergenceFailure after max_sweeps.
    """
    lap = np.array(ops.laplacian, dtype=np.float64)
    n = lap.shape[0]
    v = np.eye(n)
    tol = tol_factor * np.linalg.norm(lap)
    skip = tol / (2.0 * n)
    _, off = _jacobi_sweeps(lap, v, tol, skip, max_sweeps)
    if off > tol:
        raise ConvergenceFailure(
            f"Jacobi eigensolver stalled: off-diagonal norm {off:.3e} > {tol:.3e} "
            f"after {max_sweeps} sweeps",
            violation=float(off),
        )

    eigenvalues = np.diag(lap).copy()
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    v = v[:, order]
    # sign convention: largest-magnitude entry of each column made positive
    for col in range(n):
        peak = np.argmax(np.abs(v[:, col]))
        if v[peak, col] < 0.0:
            v[:, col] = -v[:, col]
    return SpectralDecomposition(eigenvalues=_freeze(eigenvalues), eigenvectors=_freeze(v))


def _check_signal(spec: SpectralDecomposition, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (spec.n,):
        raise DimensionMismatch(f"signal shape {z.shape} != ({spec.n},)")
    return z


def gft(spec: SpectralDecomposition, z) -> np.ndarray:
    """Graph Fourier transform: project a signal onto the eigenvector basis."""
    return spec.eigenvectors.T @ _check_signal(spec, z)


def igft(spec: SpectralDecomposition, z_tilde) -> np.ndarray:
    """Inverse graph Fourier transform."""
    return spec.eigenvectors @ _check_signal(spec, z_tilde)


def _check_pm_one(name: str, z: np.ndarray) -> None:
    if not np.all(np.isin(z, (-1.0, 1.0))):
        raise DomainError(f"{name} entries must be -1 or 1")


def spectrum_table(spec: SpectralDecomposition, s, y) -> np.ndarray:
    """Per-frequency magnitudes of the sensitive-attribute and label spectra.

    Returns an (n, 4) array with columns (index, eigenvalue, |gft(s)|,
    |gft(y)|), rows sorted by eigenvalue ascending.
    """
    s = _check_signal(spec, s)
    y = _check_signal(spec, y)
    _check_pm_one("s", s)
    _check_pm_one("y", y)
    table = np.empty((spec.n, 4))
    table[:, 0] = np.arange(spec.n)
    table[:, 1] = spec.eigenvalues
    table[:, 2] = np.abs(gft(spec, s))
    table[:, 3] = np.abs(gft(spec, y))
    return table


def write_spectrum_csv(path, table: np.ndarray) -> None:
    """Serialize a spectrum table with the fixed 4-column header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda", "abs_s_tilde", "abs_y_tilde"])
        for row in table:
            writer.writerow([int(row[0]), repr(float(row[1])),
                             repr(float(row[2])), repr(float(row[3]))])
