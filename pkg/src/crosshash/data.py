"""Dataset container, label-sharing similarity, splits, and a synthetic
two-modality generator that keeps the whole pipeline testable offline.

The on-disk dataset format is a line-oriented UTF-8 text file:

    multimodal-dataset 1
    n <points>
    d_image <image feature dim>
    d_text <text feature dim>
    labels <vocab size> <name> <name> ...
    @image_features
    <n lines, d_image space-separated floats each (one point per line)>
    @text_features
    <n lines, d_text floats each>
    @labels
    <n lines, space-separated label indices; a blank line means no labels>

Floats are written with shortest round-trip repr, so save -> load is exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .mathops import make_rng

DATASET_FORMAT = "multimodal-dataset"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message carries a 1-based line number."""


@dataclass
class MultiModalDataset:
    """Paired image/text features (column per point) plus per-point label sets."""

    image_features: np.ndarray   # (d_image, n)
    text_features: np.ndarray    # (d_text, n), nonnegative counts
    labels: list[set[int]]
    label_names: list[str]

    def __post_init__(self):
        self.image_features = np.asarray(self.image_features, dtype=np.float64)
        self.text_features = np.asarray(self.text_features, dtype=np.float64)
        if self.image_features.ndim != 2 or self.text_features.ndim != 2:
            raise ValueError("feature blocks must be 2-D (features x points)")
        n = self.image_features.shape[1]
        if self.text_features.shape[1] != n or len(self.labels) != n:
            raise ValueError(
                f"point counts disagree: image {n}, text {self.text_features.shape[1]}, "
                f"labels {len(self.labels)}"
            )
        if not (np.all(np.isfinite(self.image_features)) and np.all(np.isfinite(self.text_features))):
            raise ValueError("features contain non-finite entries")
        if self.text_features.size and self.text_features.min() < 0:
            raise ValueError("text features must be nonnegative")
        vocab = len(self.label_names)
        for point, label_set in enumerate(self.labels):
            for label in label_set:
                if not 0 <= label < vocab:
                    raise ValueError(f"point {point} has label {label} outside vocab of {vocab}")

    @property
    def size(self) -> int:
        return self.image_features.shape[1]

    def subset(self, indices) -> "MultiModalDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return MultiModalDataset(
            self.image_features[:, idx],
            self.text_features[:, idx],
            [set(self.labels[i]) for i in idx],
            list(self.label_names),
        )


def build_similarity(labels_a: list[set[int]], labels_b: list[set[int]]) -> np.ndarray:
    """S_ij = 1 iff the label sets of a_i and b_j intersect; uint8 over {0,1}."""
    n_a, n_b = len(labels_a), len(labels_b)
    vocab = 0
    for label_set in list(labels_a) + list(labels_b):
        for label in label_set:
            vocab = max(vocab, label + 1)
    if vocab == 0:
        return np.zeros((n_a, n_b), dtype=np.uint8)
    ind_a = np.zeros((n_a, vocab), dtype=np.int64)
    ind_b = np.zeros((n_b, vocab), dtype=np.int64)
    for i, label_set in enumerate(labels_a):
        for label in label_set:
            ind_a[i, label] = 1
    for j, label_set in enumerate(labels_b):
        for label in label_set:
            ind_b[j, label] = 1
    return ((ind_a @ ind_b.T) > 0).astype(np.uint8)


@dataclass(frozen=True)
class SplitSpec:
    """Query/database/train partition sizes plus the seed that fixes them."""

    query_count: int
    train_count: int
    seed: int

    def __post_init__(self):
        if self.query_count < 0 or self.train_count < 0:
            raise ValueError("split counts must be >= 0")


@dataclass
class SplitResult:
    query: MultiModalDataset
    database: MultiModalDataset
    train: MultiModalDataset
    query_indices: np.ndarray
    database_indices: np.ndarray
    train_indices: np.ndarray


def split(ds: MultiModalDataset, spec: SplitSpec) -> SplitResult:
    """Seeded disjoint query/database partition; train is a subset of database.

    Index arrays refer to the original dataset order and are sorted, so the
    same seed always yields byte-identical subsets.
    """
    n = ds.size
    if spec.query_count + 1 > n:
        raise ValueError(f"query_count {spec.query_count} leaves no database points (n={n})")
    if spec.train_count > n - spec.query_count:
        raise ValueError(
            f"train_count {spec.train_count} exceeds database size {n - spec.query_count}"
        )
    rng = make_rng(spec.seed)
    order = rng.permutation(n)
    query_idx = np.sort(order[: spec.query_count])
    database_idx = np.sort(order[spec.query_count :])
    train_idx = np.sort(rng.permutation(database_idx)[: spec.train_count])
    return SplitResult(
        ds.subset(query_idx),
        ds.subset(database_idx),
        ds.subset(train_idx),
        query_idx,
        database_idx,
        train_idx,
    )


def synth_dataset(
    classes: int,
    per_class: int,
    d_image: int,
    d_text: int,
    noise: float,
    seed: int,
    tokens_per_text: int = 64,
    topic_concentration: float = 0.15,
) -> MultiModalDataset:
    """Clustered synthetic data: one image centroid and one text topic per class.

    Image features are the class centroid (unit norm, pairwise separated)
    plus isotropic Gaussian noise.  Text features are multinomial token
    counts drawn from the class topic, a symmetric-Dirichlet draw whose
    ``topic_concentration`` controls how peaky (and hence how separable)
    the per-class vocabularies are.  Every point carries its single class
    label.  Identical seeds reproduce the dataset bit for bit.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    if d_image < 1 or d_text < 2:
        raise ValueError("feature dims too small (d_image >= 1, d_text >= 2)")
    if tokens_per_text < 1 or topic_concentration <= 0:
        raise ValueError("tokens_per_text must be >= 1 and topic_concentration > 0")
    rng = make_rng(seed)

    # Redraw the centroid set a few times if any pair is poorly separated;
    # keep the best-separated candidate so the loop always terminates.
    best_centroids, best_sep = None, np.inf
    for _ in range(16):
        candidate = rng.standard_normal((classes, d_image))
        candidate /= np.linalg.norm(candidate, axis=1, keepdims=True)
        dots = candidate @ candidate.T
        np.fill_diagonal(dots, -1.0)
        worst = float(dots.max())
        if worst < best_sep:
            best_centroids, best_sep = candidate, worst
        if worst <= 0.5:
            break
    centroids = best_centroids

    topics = rng.dirichlet(np.full(d_text, topic_concentration), size=classes)

    n = classes * per_class
    image = np.empty((d_image, n))
    text = np.empty((d_text, n))
    labels: list[set[int]] = []
    col = 0
    for k in range(classes):
        for _ in range(per_class):
            image[:, col] = centroids[k] + noise * rng.standard_normal(d_image)
            text[:, col] = rng.multinomial(tokens_per_text, topics[k])
            labels.append({k})
            col += 1
    names = [f"class{k}" for k in range(classes)]
    return MultiModalDataset(image, text, labels, names)


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_dataset(ds: MultiModalDataset, path: str | os.PathLike) -> None:
    for name in ds.label_names:
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"label name {name!r} must be non-empty and whitespace-free")
    lines = [
        f"{DATASET_FORMAT} {DATASET_VERSION}",
        f"n {ds.size}",
        f"d_image {ds.image_features.shape[0]}",
        f"d_text {ds.text_features.shape[0]}",
        ("labels " + str(len(ds.label_names))
         + ("".join(" " + name for name in ds.label_names))),
        "@image_features",
    ]
    for j in range(ds.size):
        lines.append(_fmt_row(ds.image_features[:, j]))
    lines.append("@text_features")
    for j in range(ds.size):
        lines.append(_fmt_row(ds.text_features[:, j]))
    lines.append("@labels")
    for j in range(ds.size):
        lines.append(" ".join(str(i) for i in sorted(ds.labels[j])))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            self.lines = fh.read().split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise DatasetFormatError(f"line {self.pos + 1}: file ends early, expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fail(self, message: str):
        raise DatasetFormatError(f"line {self.pos}: {message}")


def _parse_count(reader: _Reader, field: str) -> int:
    line = reader.next(f"'{field} <count>' header")
    parts = line.split()
    if len(parts) != 2 or parts[0] != field:
        reader.fail(f"expected '{field} <count>', got {line!r}")
    try:
        value = int(parts[1])
    except ValueError:
        reader.fail(f"field '{field}' is not an integer: {parts[1]!r}")
    if value < 0:
        reader.fail(f"field '{field}' must be >= 0")
    return value


def load_dataset(path: str | os.PathLike) -> MultiModalDataset:
    """Parse a dataset file; malformed input raises DatasetFormatError with a line number."""
    reader = _Reader(path)
    magic = reader.next("format header")
    if magic.split() != [DATASET_FORMAT, str(DATASET_VERSION)]:
        reader.fail(f"expected '{DATASET_FORMAT} {DATASET_VERSION}', got {magic!r}")
    n = _parse_count(reader, "n")
    d_image = _parse_count(reader, "d_image")
    d_text = _parse_count(reader, "d_text")
    vocab_line = reader.next("'labels <count> <names...>' header")
    vocab_parts = vocab_line.split()
    if not vocab_parts or vocab_parts[0] != "labels":
        reader.fail(f"expected 'labels <count> <names...>', got {vocab_line!r}")
    try:
        vocab_size = int(vocab_parts[1])
    except (IndexError, ValueError):
        reader.fail("field 'labels' needs an integer vocabulary size")
    names = vocab_parts[2:]
    if len(names) != vocab_size:
        reader.fail(f"field 'labels' declares {vocab_size} names but lists {len(names)}")

    def read_block(marker: str, dim: int) -> np.ndarray:
        line = reader.next(f"'{marker}' marker")
        if line != marker:
            reader.fail(f"expected '{marker}', got {line!r}")
        block = np.empty((dim, n))
        for j in range(n):
            line = reader.next(f"{marker} row {j + 1} of {n} (header field 'n')")
            if line.startswith("@"):
                reader.fail(
                    f"{marker} has only {j} rows but header field 'n' declares {n}"
                )
            row = line.split()
            if len(row) != dim:
                reader.fail(f"{marker} row has {len(row)} values, header declares {dim}")
            try:
                block[:, j] = [float(v) for v in row]
            except ValueError:
                reader.fail(f"{marker} row contains a non-numeric value")
        return block

    image = read_block("@image_features", d_image)
    text = read_block("@text_features", d_text)
    marker = reader.next("'@labels' marker")
    if marker != "@labels":
        reader.fail(f"expected '@labels', got {marker!r}")
    labels: list[set[int]] = []
    for j in range(n):
        row = reader.next(f"label row {j + 1} of {n} (header field 'n')").split()
        try:
            label_set = {int(v) for v in row}
        except ValueError:
            reader.fail("label row contains a non-integer value")
        for label in label_set:
            if not 0 <= label < vocab_size:
                reader.fail(f"label {label} outside declared vocabulary of {vocab_size}")
        labels.append(label_set)
    if reader.pos < len(reader.lines) and any(line.strip() for line in reader.lines[reader.pos:]):
        raise DatasetFormatError(
            f"line {reader.pos + 1}: trailing content after the {n} points declared "
            f"by header field 'n'"
        )
    try:
        return MultiModalDataset(image, text, labels, names)
    except ValueError as exc:
        raise DatasetFormatError(f"line 1: inconsistent dataset: {exc}") from exc
