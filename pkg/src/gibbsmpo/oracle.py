"""Exact dense reference: matrix exponentials and Schatten-p norms.

Everything here works on explicit d**n x d**n matrices and is only meant
for system sizes below the dense cap.  All error measurements in the rest
of the package are taken against these routines.
"""

from __future__ import annotations

import numpy as np

from .model import HamiltonianSpec, dense_matrix

DEFAULT_DENSE_CAP = 4096  # 2**12 states, n = 12 qubits


class DenseCapError(RuntimeError):
    """Requested dense operation exceeds the configured state cap."""


def dense_exp(ham: np.ndarray, factor: complex) -> np.ndarray:
    """exp(factor * ham) for Hermitian ham via eigendecomposition.

    One eigenbasis serves both real and imaginary factors, so thermal and
    real-time propagators share this path.
    """
    w, v = np.linalg.eigh(ham)
    return (v * np.exp(factor * w)) @ v.conj().T


def gibbs_dense(spec: HamiltonianSpec, beta: complex,
                cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Unnormalized thermal operator exp(-beta * H); normalization is separate."""
    return dense_exp(dense_matrix(spec, cap=cap), -beta)


def schatten_norm(op: np.ndarray, p: float) -> float:
    """[tr |op|^p]^(1/p) from singular values; p = inf is the operator norm.

    The sum is rescaled by the largest singular value so large p (as needed
    for powered-norm arguments) does not overflow.
    """
    if p != np.inf and p < 1:
        raise ValueError(f"Schatten order must be >= 1 or inf, got {p}")
    sv = np.linalg.svd(op, compute_uv=False)
    top = float(sv[0]) if sv.size else 0.0
    if p == np.inf or top == 0.0:
        return top
    return top * float(np.sum((sv / top) ** p)) ** (1.0 / p)


def relative_error(reference: np.ndarray, approx: np.ndarray, p: float) -> float:
    """||reference - approx||_p / ||reference||_p."""
    if reference.shape != approx.shape:
        raise ValueError(f"shape mismatch {reference.shape} vs {approx.shape}")
    denom = schatten_norm(reference, p)
    if denom == 0.0:
        raise ZeroDivisionError("reference operator has zero norm")
    return schatten_norm(reference - approx, p) / denom


def partition_function(spec: HamiltonianSpec, beta: float,
                       cap: int = DEFAULT_DENSE_CAP) -> float:
    """tr exp(-beta * H) from the eigenvalues."""
    w = np.linalg.eigvalsh(dense_matrix(spec, cap=cap))
    return float(np.sum(np.exp(-beta * w)))
