"""Datasets, synthetic two-domain generators, and file ingestion.

A :class:`Dataset` is a feature matrix plus optional integer labels and a
domain tag. Generators produce source/target pairs where the target is the
source distribution pushed through a shift plus an in-plane rotation, so
``shift=0, rotate=0`` yields two independent draws from the same
distribution. IDX (MNIST layout) and CSV readers let the same estimators
run on external files.
"""

from __future__ import annotations

import csv as _csv
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractError, DegenerateInputError, FormatError
from .numkit import child_rng

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

LABEL_RULES = ("linear", "xor", "moons")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional labels.

    ``y`` holds integers in {0..k-1} when present (None for unlabeled
    target data). ``consumed`` is a bookkeeping mask set by semi-supervised
    training: rows it used must be excluded from discrepancy estimation.
    """

    X: np.ndarray
    y: np.ndarray | None = None
    k: int = 2
    domain_tag: str = ""
    consumed: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ContractError(f"features must be 2-D, got ndim={X.ndim}")
        if X.size and not np.all(np.isfinite(X)):
            raise ContractError("features contain non-finite values")
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.int64)
            if y.shape != (X.shape[0],):
                raise ContractError(f"label length {y.shape} does not match n={X.shape[0]}")
            if y.size and (y.min() < 0 or y.max() >= self.k):
                raise ContractError(f"labels must lie in [0, {self.k}), got range [{y.min()}, {y.max()}]")
            object.__setattr__(self, "y", y)
        if self.k < 1:
            raise ContractError(f"class count must be >= 1, got {self.k}")
        if self.consumed is not None:
            m = np.asarray(self.consumed, dtype=bool)
            if m.shape != (X.shape[0],):
                raise ContractError("consumed mask length does not match n")
            object.__setattr__(self, "consumed", m)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def labeled(self) -> bool:
        return self.y is not None

    def without_labels(self) -> "Dataset":
        return replace(self, y=None)

    def with_consumed(self, mask) -> "Dataset":
        return replace(self, consumed=np.asarray(mask, dtype=bool))

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.X[idx],
            None if self.y is None else self.y[idx],
            self.k,
            self.domain_tag,
            None if self.consumed is None else self.consumed[idx],
        )


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint-fraction split. Fractions are positive and sum to <= 1."""

    fractions: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr:
            raise ConfigError("split needs at least one fraction")
        if any(f <= 0 for f in fr):
            raise ConfigError(f"fractions must be positive, got {fr}")
        if sum(fr) > 1.0 + 1e-9:
            raise ConfigError(f"fractions sum to {sum(fr)} > 1")
        object.__setattr__(self, "fractions", fr)


def _mixture_centers(k: int, d: int, radius: float, layout_seed: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Blob centers and label assignment for the k-component mixture.

    The canonical layout places components on a circle in the first two
    coordinates (a line if d == 1). A layout seed randomizes both the
    directions and the component-to-label assignment, which is how an
    independent labeling rule for an unrelated domain is produced.
    """
    centers = np.zeros((k, d))
    if d == 1:
        spots = (np.arange(k) - (k - 1) / 2.0) * radius
        centers[:, 0] = spots
    else:
        angles = 2.0 * math.pi * np.arange(k) / k
        centers[:, 0] = radius * np.cos(angles)
        centers[:, 1] = radius * np.sin(angles)
    labels = np.arange(k)
    if layout_seed is not None:
        rng = child_rng(layout_seed, 71)
        theta = rng.uniform(0, 2 * math.pi)
        if d >= 2:
            rot = np.eye(d)
            rot[0, 0] = rot[1, 1] = math.cos(theta)
            rot[0, 1] = -math.sin(theta)
            rot[1, 0] = math.sin(theta)
            centers = centers @ rot.T
        labels = rng.permutation(k)
    return centers, labels


def _sample_mixture(
    n: int,
    d: int,
    k: int,
    rule: str,
    rng: np.random.Generator,
    centers: np.ndarray,
    label_of: np.ndarray,
    blob_std: float,
) -> tuple[np.ndarray, np.ndarray]:
    if rule == "linear":
        comp = rng.integers(0, k, size=n)
        X = centers[comp] + blob_std * rng.standard_normal((n, d))
        return X, label_of[comp]
    if rule == "xor":
        a = 1.5
        corners = np.array([[a, a], [-a, -a], [a, -a], [-a, a]])
        quad = rng.integers(0, 4, size=n)
        X = blob_std * rng.standard_normal((n, d))
        X[:, :2] += corners[quad]
        return X, (quad >= 2).astype(np.int64)
    if rule == "moons":
        cls = rng.integers(0, 2, size=n)
        t = rng.uniform(0.0, math.pi, size=n)
        X = blob_std * rng.standard_normal((n, d))
        X[:, 0] += np.where(cls == 0, np.cos(t), 1.0 - np.cos(t))
        X[:, 1] += np.where(cls == 0, np.sin(t), 0.5 - np.sin(t))
        return X, cls.astype(np.int64)
    raise ConfigError(f"unknown label rule {rule!r}; expected one of {LABEL_RULES}")


def gen_gaussian_pair(
    n: int,
    d: int,
    shift=0.0,
    rotate: float = 0.0,
    label_rule: str = "linear",
    seed: int = 0,
    k: int = 2,
    blob_std: float = 0.6,
    radius: float = 2.5,
    layout_seed: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Draw a labeled source and a transformed labeled target.

    Both domains are i.i.d. draws from the same mixture; target features are
    then rotated by ``rotate`` radians in the (0, 1) plane and shifted by
    ``shift``. Labels are assigned before the transform, so target labels
    are oracle labels of the pre-image (estimators never read them).
    """
    if n < 4:
        raise ContractError(f"n must be >= 4, got {n}")
    if d < 1:
        raise ContractError(f"d must be >= 1, got {d}")
    if label_rule not in LABEL_RULES:
        raise ConfigError(f"unknown label rule {label_rule!r}; expected one of {LABEL_RULES}")
    if label_rule in ("xor", "moons"):
        if d < 2:
            raise ContractError(f"label rule {label_rule!r} needs d >= 2")
        if k != 2:
            raise ConfigError(f"label rule {label_rule!r} is binary, got k={k}")
    shift_vec = np.broadcast_to(np.atleast_1d(np.asarray(shift, dtype=np.float64)), (d,)).copy() \
        if np.ndim(shift) == 0 else np.asarray(shift, dtype=np.float64)
    if shift_vec.shape != (d,):
        raise ContractError(f"shift must be scalar or length {d}, got shape {shift_vec.shape}")
    if rotate != 0.0 and d < 2:
        raise ContractError("rotation needs d >= 2")

    if label_rule == "moons":
        blob_std = min(blob_std, 0.15)
    centers, label_of = _mixture_centers(k, d, radius, layout_seed)
    Xs, ys = _sample_mixture(n, d, k, label_rule, child_rng(seed, 0), centers, label_of, blob_std)
    Xt, yt = _sample_mixture(n, d, k, label_rule, child_rng(seed, 1), centers, label_of, blob_std)

    if rotate != 0.0:
        c, s = math.cos(rotate), math.sin(rotate)
        rot2 = np.array([[c, -s], [s, c]])
        Xt = Xt.copy()
        Xt[:, :2] = Xt[:, :2] @ rot2.T
    Xt = Xt + shift_vec

    kk = 2 if label_rule in ("xor", "moons") else k
    return (
        Dataset(Xs, ys, kk, domain_tag="source"),
        Dataset(Xt, yt, kk, domain_tag="target"),
    )


def add_feature_noise(D: Dataset, sigma: float, seed: int = 0) -> Dataset:
    """Add i.i.d. N(0, sigma^2) noise per feature; labels untouched."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return D
    rng = child_rng(seed, 2)
    return replace(D, X=D.X + sigma * rng.standard_normal(D.X.shape))


# ---------------------------------------------------------------------------
# IDX (big-endian MNIST layout) and CSV ingestion
# ---------------------------------------------------------------------------


def _read_be32(buf: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(buf):
        raise FormatError(f"truncated while reading {what}", offset=offset)
    return struct.unpack_from(">I", buf, offset)[0]


def _read_idx_images(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, "image magic")
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"bad image magic {magic} (expected {IDX_IMAGE_MAGIC}) in {path}", offset=0)
    n = _read_be32(buf, 4, "image count")
    rows = _read_be32(buf, 8, "row count")
    cols = _read_be32(buf, 12, "column count")
    need = 16 + n * rows * cols
    if len(buf) < need:
        raise FormatError(f"truncated image payload in {path}: have {len(buf)} bytes, need {need}", offset=len(buf))
    pixels = np.frombuffer(buf, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def _read_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, "label magic")
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"bad label magic {magic} (expected {IDX_LABEL_MAGIC}) in {path}", offset=0)
    n = _read_be32(buf, 4, "label count")
    if len(buf) < 8 + n:
        raise FormatError(f"truncated label payload in {path}: have {len(buf)} bytes, need {8 + n}", offset=len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def read_idx(images_path, labels_path=None, domain_tag: str = "") -> Dataset:
    """Read an IDX image file (pixels scaled to b/255) plus optional labels."""
    X = _read_idx_images(images_path)
    y = None
    k = 2
    if labels_path is not None:
        y = _read_idx_labels(labels_path)
        if y.shape[0] != X.shape[0]:
            raise FormatError(
                f"label count {y.shape[0]} does not match image count {X.shape[0]}",
                offset=4,
            )
        k = max(2, int(y.max()) + 1) if y.size else 2
    return Dataset(X, y, k, domain_tag=domain_tag)


def write_idx(D: Dataset, images_path, labels_path=None) -> None:
    """Write features (clipped to [0,1], quantized to bytes) in IDX layout.

    Feature vectors are stored as 1 x d images. Values that are already
    multiples of 1/255 round-trip exactly.
    """
    q = np.clip(np.rint(D.X * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, D.n, 1, D.d))
        f.write(q.tobytes())
    if labels_path is not None:
        if D.y is None:
            raise ContractError("dataset has no labels to write")
        if D.y.size and D.y.max() > 255:
            raise ContractError("IDX labels are single bytes; labels exceed 255")
        with open(labels_path, "wb") as f:
            f.write(struct.pack(">II", IDX_LABEL_MAGIC, D.n))
            f.write(D.y.astype(np.uint8).tobytes())


def read_csv(path, label_col=None, k: int | None = None, channels: int = 1, domain_tag: str = "") -> Dataset:
    """Parse a header-row CSV into a Dataset.

    ``label_col`` picks the label column by header name or index. With
    ``channels`` > 1 the feature columns are channel-major planes that get
    averaged into one grayscale plane per row.
    """
    with open(path, "rb") as f:
        raw = f.read()
    lines = raw.decode("utf-8").splitlines(keepends=True)
    if not lines:
        raise FormatError(f"empty CSV file {path}", offset=0)
    header = next(_csv.reader([lines[0]]))
    ncols = len(header)
    label_idx = None
    if label_col is not None:
        if isinstance(label_col, str):
            if label_col not in header:
                raise FormatError(f"label column {label_col!r} not in header {header}")
            label_idx = header.index(label_col)
        else:
            label_idx = int(label_col)
            if not 0 <= label_idx < ncols:
                raise FormatError(f"label column index {label_idx} out of range for {ncols} columns")

    rows, labels = [], []
    offset = len(lines[0].encode("utf-8"))
    for lineno, line in enumerate(lines[1:], start=2):
        line_bytes = len(line.encode("utf-8"))
        if not line.strip():
            offset += line_bytes
            continue
        rec = next(_csv.reader([line]))
        if len(rec) != ncols:
            raise FormatError(
                f"ragged CSV row at line {lineno}: {len(rec)} fields, expected {ncols}",
                offset=offset,
            )
        try:
            vals = [float(v) for i, v in enumerate(rec) if i != label_idx]
            if label_idx is not None:
                labels.append(int(float(rec[label_idx])))
        except ValueError as e:
            raise FormatError(f"non-numeric value at line {lineno}: {e}", offset=offset) from None
        rows.append(vals)
        offset += line_bytes
    if not rows:
        raise FormatError(f"CSV file {path} has a header but no data rows", offset=offset)
    X = np.asarray(rows, dtype=np.float64)
    if channels > 1:
        if X.shape[1] % channels:
            raise FormatError(f"{X.shape[1]} feature columns not divisible by {channels} channels")
        X = X.reshape(X.shape[0], channels, -1).mean(axis=1)
    y = np.asarray(labels, dtype=np.int64) if label_idx is not None else None
    if y is not None and k is None:
        k = max(2, int(y.max()) + 1)
    return Dataset(X, y, k or 2, domain_tag=domain_tag)


def write_csv(D: Dataset, path) -> None:
    """Emit features (and labels, when present) with a header row."""
    with open(path, "w", newline="") as f:
        w = _csv.writer(f)
        header = [f"x{j}" for j in range(D.d)]
        if D.y is not None:
            header.append("label")
        w.writerow(header)
        for i in range(D.n):
            row = [repr(float(v)) for v in D.X[i]]
            if D.y is not None:
                row.append(str(int(D.y[i])))
            w.writerow(row)


def split(D: Dataset, spec: SplitSpec) -> list[Dataset]:
    """Seeded disjoint split, sized by the floor-then-remainder rule."""
    n = D.n
    if n == 0:
        raise DegenerateInputError("cannot split an empty dataset")
    targets = [f * n for f in spec.fractions]
    sizes = [int(math.floor(t + 1e-9)) for t in targets]
    total = int(math.floor(sum(targets) + 1e-9))
    leftovers = total - sum(sizes)
    if leftovers > 0:
        order = sorted(range(len(sizes)), key=lambda i: (-(targets[i] - sizes[i]), i))
        for i in order[:leftovers]:
            sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise ConfigError(f"split fractions {spec.fractions} yield an empty subset at n={n}")
    perm = child_rng(spec.seed, 3).permutation(n)
    out, start = [], 0
    for s in sizes:
        out.append(D.take(np.sort(perm[start : start + s])))
        start += s
    return out
