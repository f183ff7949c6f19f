"""Datasets, LibSVM-format I/O, synthetic generators, and split utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LibsvmFormatError(ValueError):
    """Malformed LibSVM input; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix paired with binary labels in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        if X.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got ndim={X.ndim}")
        if y.ndim != 1:
            raise ValueError("labels must be a 1-D vector")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"row count {X.shape[0]} does not match label count {y.shape[0]}"
            )
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("every label must be exactly -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def with_labels(self, z: np.ndarray) -> "Dataset":
        """Same features, different (still binary) labels."""
        return Dataset(self.X, z)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/test sizes drawn with a seeded shuffle."""

    train_size: int
    test_size: int
    seed: int


def parse_libsvm(text: str | bytes) -> Dataset:
    """Parse sparse LibSVM text (`<label> <index>:<value> ...`) into a dense Dataset.

    Indices are 1-based and must be strictly increasing within a line; the
    feature count is the maximum index seen anywhere. Any strictly positive
    label maps to +1, everything else to -1. CRLF input is tolerated.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    d = 0
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise LibsvmFormatError(f"non-numeric label {parts[0]!r}", line_no) from None
        feats: dict[int, float] = {}
        prev_idx = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(f"missing ':' in token {tok!r}", line_no)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmFormatError(f"non-numeric token {tok!r}", line_no) from None
            if idx <= prev_idx:
                raise LibsvmFormatError(
                    f"index {idx} not strictly increasing (previous {prev_idx})", line_no
                )
            prev_idx = idx
            feats[idx] = val
        labels.append(1.0 if label > 0 else -1.0)
        rows.append(feats)
        d = max(d, prev_idx)
    if not rows:
        raise LibsvmFormatError("empty input")
    X = np.zeros((len(rows), d))
    for i, feats in enumerate(rows):
        for idx, val in feats.items():
            X[i, idx - 1] = val
    return Dataset(X, np.array(labels))


def write_libsvm(ds: Dataset) -> str:
    """Serialize a Dataset to LibSVM text; zero features omitted, LF endings.

    Values use shortest round-trip decimal formatting, so
    parse_libsvm(write_libsvm(ds)) reproduces ds exactly (up to trailing
    all-zero feature columns, which the sparse format cannot express).
    """
    lines = []
    for i in range(ds.n):
        parts = ["+1" if ds.y[i] > 0 else "-1"]
        row = ds.X[i]
        for j in np.nonzero(row)[0]:
            parts.append(f"{j + 1}:{row[j]!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def gen_linear_2d(n: int, margin: float, seed: int) -> Dataset:
    """n/2 points per class in 2-D, separated by the line x2 = 0.5 with a gap
    of at least `margin`. Deterministic in (n, margin, seed)."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    rng = np.random.default_rng(seed)
    half = n // 2
    u = rng.uniform(size=(n, 2))
    X = np.empty((n, 2))
    X[:, 0] = u[:, 0]
    X[:half, 1] = 0.5 + margin / 2.0 + 0.5 * u[:half, 1]
    X[half:, 1] = 0.5 - margin / 2.0 - 0.5 * u[half:, 1]
    y = np.concatenate([np.ones(half), -np.ones(half)])
    return Dataset(X, y)


def gen_parabolic_2d(n: int, margin: float, seed: int) -> Dataset:
    """n/2 points per class in 2-D, separated by the parabola x2 = x1^2 - 0.5
    with a vertical gap of at least `margin`."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    rng = np.random.default_rng(seed)
    half = n // 2
    u = rng.uniform(size=(n, 2))
    X = np.empty((n, 2))
    X[:, 0] = 2.0 * u[:, 0] - 1.0
    curve = X[:, 0] ** 2 - 0.5
    X[:half, 1] = curve[:half] + margin / 2.0 + 0.75 * u[:half, 1]
    X[half:, 1] = curve[half:] - margin / 2.0 - 0.75 * u[half:, 1]
    y = np.concatenate([np.ones(half), -np.ones(half)])
    return Dataset(X, y)


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then disjoint train/test index sets."""
    if spec.train_size + spec.test_size > ds.n:
        raise ValueError(
            f"train_size + test_size = {spec.train_size + spec.test_size} "
            f"exceeds available samples {ds.n}"
        )
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    train_idx = perm[: spec.train_size]
    test_idx = perm[spec.train_size : spec.train_size + spec.test_size]
    return ds.subset(train_idx), ds.subset(test_idx)


def kfold(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """k seeded folds of {0..n-1}: validation sets are disjoint, cover all
    indices, and differ in size by at most 1 (larger folds first)."""
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        val = np.sort(perm[start : start + size])
        train = np.sort(np.concatenate([perm[:start], perm[start + size :]]))
        folds.append((train, val))
        start += size
    return folds
