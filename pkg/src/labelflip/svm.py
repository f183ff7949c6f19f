"""Weighted soft-margin SVM: SMO-style dual solver, prediction, losses, and the
structural-risk objective used by the label-flip attacks.

The solver accepts real-valued training labels (not just +/-1): the dual
    min_a  1/2 a' Q a - 1'a   s.t.  z'a = 0,  0 <= a_i <= C*c_i,
with Q = (z z') o K, is well defined for any real z, which is what the
continuous-relaxation attack needs. Samples with c_i = 0 or z_i = 0 are
excluded from the dual (alpha forced to 0) but kept for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import Dataset
from .kernels import LINEAR, RBF, Kernel, gram

DEFAULT_KKT_TOL = 1e-6
DEFAULT_MAX_PASSES = 1_000_000

# Samples this close to a box bound are snapped onto it, which keeps the
# working-pair selection from stalling on vanishing step sizes.
_SNAP = 1e-12


class ConvergenceError(RuntimeError):
    """Solver hit the iteration cap; carries the worst KKT violation."""

    def __init__(self, message: str, worst_violation: float):
        super().__init__(f"{message} (worst KKT violation {worst_violation:.3e})")
        self.worst_violation = worst_violation


@dataclass(frozen=True)
class TrainConfig:
    """Regularization trade-off C, optional per-sample cost multipliers
    (effective box bound C*c_i), solver tolerance and iteration cap."""

    C: float
    per_sample_cost: np.ndarray | None = None
    kkt_tol: float = DEFAULT_KKT_TOL
    max_passes: int = DEFAULT_MAX_PASSES

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.kkt_tol <= 0:
            raise ValueError("kkt_tol must be positive")
        if self.per_sample_cost is not None:
            cost = np.asarray(self.per_sample_cost, dtype=np.float64)
            if cost.ndim != 1 or np.any(cost < 0) or not np.all(np.isfinite(cost)):
                raise ValueError("per_sample_cost must be a vector of finite values >= 0")
            object.__setattr__(self, "per_sample_cost", cost)


@dataclass(frozen=True)
class SvmModel:
    """Trained dual solution plus the index partition it induces.

    margin_idx:  0 < alpha < box and |z f(x) - 1| within tolerance
    reserve_idx: alpha at 0 (includes samples excluded from the dual)
    error_idx:   alpha at the box bound
    """

    X: np.ndarray
    z: np.ndarray
    kernel: Kernel
    alpha: np.ndarray
    b: float
    box: np.ndarray
    C: float
    kkt_tol: float
    margin_idx: np.ndarray
    reserve_idx: np.ndarray
    error_idx: np.ndarray
    kkt_gap: float = field(default=0.0, compare=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return decision_function(self, X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        f = decision_function(self, X)
        return np.where(f >= 0.0, 1.0, -1.0)


@njit(cache=True)
def _smo_core(K, z, upper, tol, max_iter, alpha, grad):
    """Maximal-violating-pair SMO on the dual; alpha and grad updated in place.

    grad maintains Q @ alpha - 1. Returns (iterations, final gap) where the
    gap is the width of the infeasibility interval for the bias: the solution
    is KKT-optimal when gap < tol.
    """
    n = K.shape[0]
    gap = np.inf
    for it in range(max_iter):
        s_lo = -np.inf
        s_hi = np.inf
        i = -1
        j = -1
        for t in range(n):
            zt = z[t]
            ct = upper[t]
            if ct <= 0.0 or zt == 0.0:
                continue
            st = -grad[t] / zt
            at = alpha[t]
            if ((zt > 0.0 and at < ct) or (zt < 0.0 and at > 0.0)) and st > s_lo:
                s_lo = st
                i = t
            if ((zt > 0.0 and at > 0.0) or (zt < 0.0 and at < ct)) and st < s_hi:
                s_hi = st
                j = t
        if i < 0 or j < 0:
            return it, 0.0
        gap = s_lo - s_hi
        if gap < tol:
            return it, gap
        zi = z[i]
        zj = z[j]
        # Step d > 0 moves alpha_i by d/z_i and alpha_j by -d/z_j, preserving
        # the equality constraint; caps keep both inside the box.
        cap_i = zi * (upper[i] - alpha[i]) if zi > 0.0 else -zi * alpha[i]
        cap_j = zj * alpha[j] if zj > 0.0 else -zj * (upper[j] - alpha[j])
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        d = min(cap_i, cap_j)
        if eta > 1e-12:
            d = min(d, gap / eta)
        ai = alpha[i] + d / zi
        aj = alpha[j] - d / zj
        snap_i = _SNAP * max(1.0, upper[i])
        snap_j = _SNAP * max(1.0, upper[j])
        if ai < snap_i:
            ai = 0.0
        elif ai > upper[i] - snap_i:
            ai = upper[i]
        if aj < snap_j:
            aj = 0.0
        elif aj > upper[j] - snap_j:
            aj = upper[j]
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            grad[t] += d * z[t] * (K[t, i] - K[t, j])
    return max_iter, gap


def _repair_equality(alpha: np.ndarray, z: np.ndarray) -> None:
    """Restore z'alpha = 0 in place by shrinking coefficients, front to back."""
    r = float(z @ alpha)
    for i in range(alpha.shape[0]):
        if abs(r) < 1e-15:
            break
        zi = z[i]
        if zi == 0.0 or alpha[i] <= 0.0:
            continue
        if (zi > 0.0) == (r > 0.0):
            step = min(alpha[i], r / zi if zi > 0.0 else r / zi)
            step = min(alpha[i], abs(r / zi))
            alpha[i] -= step
            r -= zi * step
    if abs(r) >= 1e-15:
        # Last resort: a zero vector is always feasible.
        alpha[:] = 0.0


def train(
    ds: Dataset,
    z: np.ndarray,
    kernel: Kernel,
    cfg: TrainConfig,
    gram_matrix: np.ndarray | None = None,
    alpha0: np.ndarray | None = None,
) -> SvmModel:
    """Train a weighted soft-margin SVM on ds.X with (possibly real-valued)
    training labels z.

    gram_matrix: optional cached square Gram matrix of ds.X (label flips never
    change it, so attacks compute it once). alpha0: optional warm start; it is
    clipped to the box and projected back onto the equality constraint.
    """
    X = ds.X
    n = X.shape[0]
    z = np.ascontiguousarray(np.asarray(z, dtype=np.float64))
    if z.shape != (n,):
        raise ValueError(f"label vector has shape {z.shape}, expected ({n},)")
    if n < 2:
        raise ValueError("need at least 2 training samples")
    if not (np.any(z > 0) and np.any(z < 0)):
        raise ValueError("single-class labels: need both a positive and a negative label")
    cost = cfg.per_sample_cost
    if cost is None:
        upper = np.full(n, cfg.C)
    else:
        if cost.shape != (n,):
            raise ValueError(f"cost vector has shape {cost.shape}, expected ({n},)")
        upper = cfg.C * cost
    if np.max(upper) <= 0.0:
        raise ValueError("zero box constraints: every per-sample cost is 0")
    K = gram(kernel, X) if gram_matrix is None else np.ascontiguousarray(gram_matrix)
    if K.shape != (n, n):
        raise ValueError(f"gram matrix has shape {K.shape}, expected ({n}, {n})")

    excluded = (upper <= 0.0) | (z == 0.0)
    upper = np.where(excluded, 0.0, upper)
    if alpha0 is None:
        alpha = np.zeros(n)
        grad = -np.ones(n)
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=np.float64).copy(), 0.0, upper)
        _repair_equality(alpha, np.where(excluded, 0.0, z))
        alpha[excluded] = 0.0
        grad = z * (K @ (z * alpha)) - 1.0

    iters, gap = _smo_core(K, z, upper, cfg.kkt_tol, cfg.max_passes, alpha, grad)
    b, margin, reserve, error = _classify_sets(alpha, grad, z, upper, cfg.kkt_tol, excluded)
    model = SvmModel(
        X=X, z=z, kernel=kernel, alpha=alpha, b=b, box=upper, C=cfg.C,
        kkt_tol=cfg.kkt_tol, margin_idx=margin, reserve_idx=reserve,
        error_idx=error, kkt_gap=float(gap),
    )
    if gap >= cfg.kkt_tol:
        raise ConvergenceError(
            f"solver did not converge within {cfg.max_passes} iterations",
            float(np.max(kkt_violations(model))),
        )
    return model


def _classify_sets(alpha, grad, z, upper, tol, excluded):
    """Bias from the KKT conditions plus the margin/reserve/error partition."""
    included = ~excluded
    zs = np.where(z == 0.0, 1.0, z)
    s = -grad / zs
    interior = included & (alpha > tol) & (alpha < upper - tol)
    lo = included & (((z > 0) & (alpha < upper)) | ((z < 0) & (alpha > 0)))
    hi = included & (((z > 0) & (alpha > 0)) | ((z < 0) & (alpha < upper)))
    if interior.any():
        b = float(np.mean(s[interior]))
    elif lo.any() and hi.any():
        b = float((np.max(s[lo]) + np.min(s[hi])) / 2.0)
    elif lo.any():
        b = float(np.max(s[lo]))
    elif hi.any():
        b = float(np.min(s[hi]))
    else:
        b = 0.0
    g = grad + z * b
    margin_mask = interior & (np.abs(g) <= 10.0 * tol)
    error_mask = included & (alpha >= upper - tol) & ~margin_mask
    # In-band samples that miss the margin tolerance are split by the sign of
    # the KKT residual; post-convergence this set is empty.
    leftovers = interior & ~margin_mask & ~error_mask
    error_mask |= leftovers & (g < 0)
    reserve_mask = ~margin_mask & ~error_mask
    idx = np.arange(alpha.shape[0])
    return b, idx[margin_mask], idx[reserve_mask], idx[error_mask]


def kkt_violations(model: SvmModel) -> np.ndarray:
    """Per-sample violation of the optimality partition at the trained point.

    For g = z*f(x) - 1: samples at alpha = 0 require g >= 0, samples at the
    box bound require g <= 0, and interior samples require g = 0. Samples
    excluded from the dual report 0.
    """
    f = decision_values(model)
    g = model.z * f - 1.0
    tol = model.kkt_tol
    upper = model.box
    excluded = (upper <= 0.0) | (model.z == 0.0)
    at_zero = model.alpha <= tol
    at_box = model.alpha >= upper - tol
    viol = np.abs(g)
    viol = np.where(at_zero, np.maximum(0.0, -g), viol)
    viol = np.where(at_box & ~at_zero, np.maximum(0.0, g), viol)
    return np.where(excluded, 0.0, viol)


def decision_values(model: SvmModel, gram_matrix: np.ndarray | None = None) -> np.ndarray:
    """f on the model's own training points; pass the cached Gram to skip
    recomputing it."""
    K = gram(model.kernel, model.X) if gram_matrix is None else gram_matrix
    return K @ (model.z * model.alpha) + model.b


def decision_function(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """f(x) = sum_i alpha_i z_i k(x, x_i) + b for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.X.shape[1]:
        raise ValueError(f"points have shape {X.shape}, expected (*, {model.X.shape[1]})")
    K = gram(model.kernel, X, model.X)
    return K @ (model.z * model.alpha) + model.b


def hinge_losses(
    model: SvmModel, ds: Dataset, y: np.ndarray, f: np.ndarray | None = None
) -> np.ndarray:
    """max(0, 1 - y_i f(x_i)) on ds, evaluated against labels y."""
    y = np.asarray(y, dtype=np.float64)
    if f is None:
        f = decision_function(model, ds.X)
    if y.shape != f.shape:
        raise ValueError(f"label vector has shape {y.shape}, expected {f.shape}")
    return np.maximum(0.0, 1.0 - y * f)


def zero_one_error(
    model: SvmModel, ds: Dataset, y: np.ndarray, f: np.ndarray | None = None
) -> float:
    """Fraction of sign mismatches (f >= 0 counts as positive)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] == 0:
        raise ValueError("empty dataset")
    if f is None:
        f = decision_function(model, ds.X)
    pred = np.where(f >= 0.0, 1.0, -1.0)
    return float(np.mean(pred != np.where(y > 0, 1.0, -1.0)))


def objective_V(
    model: SvmModel,
    ds: Dataset,
    y_eval: np.ndarray,
    C: float,
    gram_matrix: np.ndarray | None = None,
) -> float:
    """Structural risk of the model trained on labels z, scored against y_eval:
    1/2 a'Qa (squared function norm in the dual) plus C times the summed hinge
    loss over ds."""
    y_eval = np.asarray(y_eval, dtype=np.float64)
    if y_eval.shape[0] != model.n or ds.n != model.n:
        raise ValueError("evaluation labels/dataset do not match the training set size")
    K = gram(model.kernel, model.X) if gram_matrix is None else gram_matrix
    za = model.z * model.alpha
    f = K @ za + model.b
    norm_sq = float(za @ K @ za)
    hinge = np.maximum(0.0, 1.0 - y_eval * f)
    return 0.5 * norm_sq + C * float(np.sum(hinge))


def dump_model(model: SvmModel) -> str:
    """Versioned plain-text serialization with exact decimal round trip.

    Stores the dual solution, not the features; load_model re-attaches them.
    """
    k = model.kernel
    lines = [
        "labelflip-model 1",
        f"kernel {k.kind}",
        f"gamma {k.gamma!r}" if k.kind == RBF else "gamma -",
        f"C {model.C!r}",
        f"n {model.n}",
        f"b {model.b!r}",
        "alpha " + " ".join(repr(a) for a in model.alpha),
        "labels " + " ".join(repr(v) for v in model.z),
    ]
    return "\n".join(lines) + "\n"


def load_model(text: str, X: np.ndarray) -> SvmModel:
    """Rebuild a model from dump_model output and its training features."""
    fields = {}
    lines = text.strip().split("\n")
    if not lines or lines[0].split() != ["labelflip-model", "1"]:
        raise ValueError("not a labelflip-model v1 document")
    for line in lines[1:]:
        key, _, value = line.partition(" ")
        fields[key] = value
    kind = fields["kernel"]
    kernel = Kernel(LINEAR) if kind == LINEAR else Kernel(RBF, float(fields["gamma"]))
    C = float(fields["C"])
    n = int(fields["n"])
    alpha = np.array([float(v) for v in fields["alpha"].split()])
    z = np.array([float(v) for v in fields["labels"].split()])
    b = float(fields["b"])
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != n or alpha.shape[0] != n or z.shape[0] != n:
        raise ValueError("feature/coefficient sizes do not match the stored n")
    upper = np.full(n, C)
    excluded = z == 0.0
    K = gram(kernel, X)
    grad = z * (K @ (z * alpha)) - 1.0
    _, margin, reserve, error = _classify_sets(
        alpha, grad, z, np.where(excluded, 0.0, upper), DEFAULT_KKT_TOL, excluded
    )
    return SvmModel(
        X=X, z=z, kernel=kernel, alpha=alpha, b=b, box=np.where(excluded, 0.0, upper),
        C=C, kkt_tol=DEFAULT_KKT_TOL, margin_idx=margin, reserve_idx=reserve,
        error_idx=error,
    )
