"""Kernel functions and Gram-matrix construction shared by the solver and attacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
RBF = "rbf"


@dataclass(frozen=True)
class Kernel:
    """Kernel spec: 'linear' (dot product) or 'rbf' (exp(-gamma * ||a-b||^2))."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, RBF):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == RBF:
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("rbf kernel requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError("linear kernel takes no gamma")

    def __str__(self) -> str:
        return self.kind if self.kind == LINEAR else f"rbf(gamma={self.gamma})"


def kernel_eval(kernel: Kernel, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate the kernel on a single pair of equally-sized vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if kernel.kind == LINEAR:
        return float(a @ b)
    diff = a - b
    return float(np.exp(-kernel.gamma * (diff @ diff)))


def gram(kernel: Kernel, X: np.ndarray, Z: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix K[i, j] = k(X[i], Z[j]); Z=None means Z=X.

    The square case is exactly symmetric, and the RBF diagonal is exactly 1.
    """
    X = np.asarray(X, dtype=np.float64)
    same = Z is None
    Z = X if same else np.asarray(Z, dtype=np.float64)
    if X.ndim != 2 or Z.ndim != 2 or X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Z.shape}")
    if kernel.kind == LINEAR:
        return X @ Z.T
    sq_x = np.einsum("ij,ij->i", X, X)
    sq_z = sq_x if same else np.einsum("ij,ij->i", Z, Z)
    d2 = sq_x[:, None] + sq_z[None, :] - 2.0 * (X @ Z.T)
    np.clip(d2, 0.0, None, out=d2)
    if same:
        np.fill_diagonal(d2, 0.0)
    return np.exp(-kernel.gamma * d2)


def label_annotate(K: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Q[i, j] = u[i] * v[j] * K[i, j] for label vectors u, v."""
    K = np.asarray(K, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if K.shape != (u.shape[0], v.shape[0]):
        raise ValueError(
            f"dimension mismatch: K is {K.shape}, labels are {u.shape[0]}x{v.shape[0]}"
        )
    return K * np.outer(u, v)
