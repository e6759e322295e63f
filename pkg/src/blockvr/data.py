"""Sample-major sparse datasets, feature-block partitions, and synthetic generators.

Feature matrices are stored row-sparse (CSR-style index/value arrays per
sample) because every solver in this package accesses data one sample at a
time.  No column-major copy is kept.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class LibsvmParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class SparseDataset:
    """n samples with sparse feature rows and one real label each.

    ``indices`` are strictly increasing within each row, live in ``[0, d)``,
    and never store explicit zeros.  ``row_ids`` is a derived per-nonzero
    sample id used for vectorized accumulations.
    """

    n: int
    d: int
    labels: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    row_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.n < 1 or self.d < 1:
            raise ValueError("dataset needs n >= 1 and d >= 1")
        if self.labels.shape != (self.n,):
            raise ValueError("labels must have shape (n,)")
        if self.indptr.shape != (self.n + 1,) or self.indptr[0] != 0:
            raise ValueError("indptr must have shape (n+1,) and start at 0")
        if self.indptr[-1] != len(self.indices) or len(self.indices) != len(self.values):
            raise ValueError("indptr/indices/values lengths disagree")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if len(self.indices):
            if self.indices.min() < 0 or self.indices.max() >= self.d:
                raise ValueError("feature index out of range")
            if np.any(self.values == 0.0):
                raise ValueError("explicit zero values are not allowed")
            # strictly increasing within each row
            diffs = np.diff(self.indices)
            row_starts = self.indptr[1:-1]
            interior = np.ones(len(diffs), dtype=bool)
            interior[row_starts[(row_starts > 0) & (row_starts < len(self.indices))] - 1] = False
            if np.any(diffs[interior] <= 0):
                raise ValueError("indices must be strictly increasing within each row")
        if not np.all(np.isfinite(self.values)) or not np.all(np.isfinite(self.labels)):
            raise ValueError("values and labels must be finite")
        if self.row_ids is None:
            self.row_ids = np.repeat(
                np.arange(self.n, dtype=np.int64), np.diff(self.indptr)
            )

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Views of the index/value arrays of sample i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def dot(self, x: np.ndarray) -> np.ndarray:
        """Margins A @ x for all samples (x may be longer than d; extra tail ignored)."""
        prods = self.values * x[self.indices]
        return np.bincount(self.row_ids, weights=prods, minlength=self.n)

    def accumulate_rows(self, w: np.ndarray, out_dim: int | None = None) -> np.ndarray:
        """sum_i w[i] * a_i as a dense vector."""
        w_rep = np.repeat(w, np.diff(self.indptr))
        return np.bincount(
            self.indices, weights=self.values * w_rep, minlength=out_dim or self.d
        )

    def row_sq_norms(self) -> np.ndarray:
        return np.bincount(self.row_ids, weights=self.values**2, minlength=self.n)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (
            self.n == other.n
            and self.d == other.d
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


def sparsity(ds: SparseDataset) -> float:
    """Fraction of stored nonzeros: nnz / (n*d)."""
    return ds.nnz / (ds.n * ds.d)


def parse_libsvm(source, expected_dim: int | None = None) -> SparseDataset:
    """Parse the classic ``label idx:val ...`` text format.

    ``source`` is a path, a text/byte stream, or an iterable of lines.
    Paths ending in .bz2 or .gz are decompressed transparently.  Indices
    are 1-based and must be strictly ascending within a line; explicit
    zero values are dropped.  The feature dimension is
    max(seen index, expected_dim).
    """
    close_after = False
    if isinstance(source, (str, bytes)):
        path = source.decode() if isinstance(source, bytes) else source
        if path.endswith(".bz2"):
            import bz2

            stream = bz2.open(path, "rb")
        elif path.endswith(".gz"):
            import gzip

            stream = gzip.open(path, "rb")
        else:
            stream = open(path, "rb")
        close_after = True
    else:
        stream = source
    labels: list[float] = []
    indptr: list[int] = [0]
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    max_index = 0
    try:
        for line_no, raw in enumerate(stream, start=1):
            if isinstance(raw, bytes):
                raw = raw.decode("ascii", errors="replace")
            tokens = raw.split()
            if not tokens:
                continue
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(line_no, f"invalid label {tokens[0]!r}") from None
            row_idx: list[int] = []
            row_val: list[float] = []
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise LibsvmParseError(line_no, f"invalid token {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(line_no, f"invalid token {tok!r}") from None
                if idx < 1:
                    raise LibsvmParseError(line_no, f"index {idx} must be >= 1")
                if idx <= prev:
                    raise LibsvmParseError(
                        line_no, f"index {idx} not ascending (previous {prev})"
                    )
                prev = idx
                if val == 0.0:
                    continue
                row_idx.append(idx - 1)
                row_val.append(val)
            labels.append(label)
            max_index = max(max_index, prev)
            indices.append(np.asarray(row_idx, dtype=np.int64))
            values.append(np.asarray(row_val, dtype=np.float64))
            indptr.append(indptr[-1] + len(row_idx))
    finally:
        if close_after:
            stream.close()
    if not labels:
        raise LibsvmParseError(0, "no samples found")
    d = max(max_index, expected_dim or 0)
    if d < 1:
        raise LibsvmParseError(0, "no features found and no expected_dim given")
    return SparseDataset(
        n=len(labels),
        d=d,
        labels=np.asarray(labels),
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
        values=np.concatenate(values) if values else np.zeros(0),
    )


def serialize_libsvm(ds: SparseDataset) -> str:
    """Inverse of parse_libsvm (indices re-emitted 1-based, floats via repr)."""
    out = io.StringIO()
    for i in range(ds.n):
        idx, val = ds.row(i)
        parts = [repr(float(ds.labels[i]))]
        parts.extend(f"{j + 1}:{float(v)!r}" for j, v in zip(idx, val))
        out.write(" ".join(parts))
        out.write("\n")
    return out.getvalue()


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous equal-width partition of {0..d-1} into B blocks.

    When B does not divide d the coordinate space is padded with phantom
    coordinates up to ``padded_d``; phantom coordinates carry no data and
    stay exactly zero under every update in this package.
    """

    B: int
    omega: int
    d: int
    padded_d: int

    def block_range(self, l: int) -> tuple[int, int]:
        return l * self.omega, (l + 1) * self.omega

    def block_of(self, coord: int) -> int:
        return coord // self.omega


def make_partition(d: int, B: int) -> BlockPartition:
    if B < 1:
        raise ValueError(f"need at least one block, got B={B}")
    if d < 1:
        raise ValueError(f"need at least one coordinate, got d={d}")
    if B > d:
        raise ValueError(f"B={B} blocks over only d={d} coordinates")
    omega = -(-d // B)  # ceil
    return BlockPartition(B=B, omega=omega, d=d, padded_d=omega * B)


def row_block_segment(
    ds: SparseDataset, part: BlockPartition, i: int, l: int
) -> tuple[np.ndarray, np.ndarray]:
    """Index/value views of sample i restricted to block l."""
    idx, val = ds.row(i)
    lo, hi = part.block_range(l)
    a, b = np.searchsorted(idx, (lo, hi))
    return idx[a:b], val[a:b]


def block_inner_product(
    ds: SparseDataset, part: BlockPartition, i: int, l: int, v: np.ndarray
) -> float:
    """[a_i]_l . v where v holds the block-l coordinates (length omega)."""
    idx, val = row_block_segment(ds, part, i, l)
    lo = l * part.omega
    return float(np.dot(val, v[idx - lo]))


def make_sparse_classification(
    n: int,
    d: int,
    density: float,
    seed: int,
    support_frac: float = 0.1,
    flip_prob: float = 0.05,
) -> SparseDataset:
    """Gaussian sparse rows; +-1 labels from a planted sparse predictor, noisy.

    Every row keeps at least one nonzero so no sample is silent.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    row_nnz = np.maximum(1, rng.binomial(d, density, size=n))
    indices = []
    values = []
    indptr = [0]
    for k in row_nnz:
        idx = np.sort(rng.choice(d, size=k, replace=False))
        val = rng.standard_normal(k)
        val[val == 0.0] = 1.0
        indices.append(idx)
        values.append(val)
        indptr.append(indptr[-1] + k)
    support = rng.choice(d, size=max(1, int(round(support_frac * d))), replace=False)
    w = np.zeros(d)
    w[support] = rng.standard_normal(len(support))
    ds = SparseDataset(
        n=n,
        d=d,
        labels=np.zeros(n),
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.concatenate(indices),
        values=np.concatenate(values),
    )
    margins = ds.dot(w)
    labels = np.where(margins >= 0, 1.0, -1.0)
    flips = rng.random(n) < flip_prob
    labels[flips] *= -1.0
    ds.labels = labels
    return ds


def make_lowrank_regression(
    n: int,
    d: int,
    rank: int,
    cond: float,
    seed: int,
    planted_scale: float = 1.0,
) -> tuple[SparseDataset, np.ndarray]:
    """Dense rows A = U S V^T with geometric spectrum; labels y = A w.

    The linear system is consistent, so the least-squares objective attains
    exactly zero.  Returns (dataset, planted w).
    """
    rng = np.random.default_rng(seed)
    r = min(rank, n, d)
    U, _ = np.linalg.qr(rng.standard_normal((n, r)))
    V, _ = np.linalg.qr(rng.standard_normal((d, r)))
    s = np.geomspace(1.0, 1.0 / cond, r)
    A = (U * s) @ V.T
    A[A == 0.0] = 1e-12
    w = planted_scale * rng.standard_normal(d)
    y = A @ w
    indices = np.tile(np.arange(d, dtype=np.int64), n)
    ds = SparseDataset(
        n=n,
        d=d,
        labels=y,
        indptr=np.arange(0, n * d + 1, d, dtype=np.int64),
        indices=indices,
        values=A.ravel(),
    )
    return ds, w
