"""Hamming-space retrieval evaluation: ranking with mean average precision,
radius lookup with precision/recall/F-measure, and full PR curves.

Codes live in {-1,+1}, so the Hamming distance between two length-c codes is
(c - a.b) / 2.  Rankings break distance ties by original database position,
which keeps every metric deterministic.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .data import build_similarity

CODE_MAGIC = b"CMHC"
CODE_VERSION = 1
_CODE_HEADER = struct.Struct("<4sHII")   # magic, version, code length c, point count m


def _check_code_array(codes, name: str) -> np.ndarray:
    arr = np.asarray(codes)
    if arr.size and not np.all(np.isin(arr, (-1, 1))):
        raise ValueError(f"{name} entries must all be -1 or +1")
    return arr.astype(np.int8)


@dataclass
class CodeDatabase:
    """Hash codes column-per-point plus the matching point identifiers."""

    codes: np.ndarray      # (c, m) int8 over {-1,+1}
    ids: list[str]

    def __post_init__(self):
        self.codes = _check_code_array(self.codes, "codes")
        if self.codes.ndim != 2:
            raise ValueError("codes must be 2-D (code length x points)")
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != self.codes.shape[1]:
            raise ValueError(
                f"{len(self.ids)} ids for {self.codes.shape[1]} code columns"
            )

    @property
    def code_length(self) -> int:
        return self.codes.shape[0]

    @property
    def size(self) -> int:
        return self.codes.shape[1]


@dataclass
class GroundTruth:
    """Binary relevance flags for every (query, database point) pair."""

    relevance: np.ndarray   # bool (n_queries, n_database)

    def __post_init__(self):
        self.relevance = np.asarray(self.relevance).astype(bool)
        if self.relevance.ndim != 2:
            raise ValueError("relevance must be 2-D (queries x database)")

    @classmethod
    def from_labels(cls, query_labels, database_labels) -> "GroundTruth":
        """Label-sharing semantics: relevant iff the label sets intersect."""
        return cls(build_similarity(query_labels, database_labels).astype(bool))


@dataclass(frozen=True)
class PRPoint:
    radius: int
    precision: float
    recall: float
    f_measure: float


def hamming_distance(a, b) -> int:
    """Positions where two {-1,+1} codes differ, computed as (c - a.b)/2."""
    a = _check_code_array(a, "first code")
    b = _check_code_array(b, "second code")
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"codes must be 1-D and equal length, got {a.shape} and {b.shape}")
    c = a.shape[0]
    return (c - int(a.astype(np.int64) @ b.astype(np.int64))) // 2


def _query_distances(query_code, db: CodeDatabase) -> np.ndarray:
    q = _check_code_array(query_code, "query code")
    if q.ndim != 1 or q.shape[0] != db.code_length:
        raise ValueError(
            f"query code length {q.shape} does not match database code length {db.code_length}"
        )
    dots = q.astype(np.int64) @ db.codes.astype(np.int64)
    return (db.code_length - dots) // 2


def rank_database(query_code, db: CodeDatabase) -> list[str]:
    """All database ids ordered by (distance ascending, original index ascending)."""
    order = np.argsort(_query_distances(query_code, db), kind="stable")
    return [db.ids[k] for k in order]


def hash_lookup(query_code, db: CodeDatabase, radius: int) -> set[str]:
    """Ids of every database point within Hamming radius ``radius`` of the query."""
    if not 0 <= radius <= db.code_length:
        raise ValueError(f"radius {radius} outside [0, {db.code_length}]")
    distances = _query_distances(query_code, db)
    return {db.ids[k] for k in np.nonzero(distances <= radius)[0]}


def average_precision(ranking: list[str], relevant_ids) -> float:
    """Mean of precision@k over the ranks holding relevant items, / total relevant.

    ``ranking`` must cover the whole database; a query with no relevant
    point has no defined AP and raises ValueError (callers exclude it).
    """
    relevant = set(relevant_ids)
    flags = [item in relevant for item in ranking]
    return _ap_from_flags(flags, top_k=None)


def _ap_from_flags(flags, top_k: int | None) -> float:
    total_relevant = sum(flags)
    if total_relevant == 0:
        raise ValueError("query has no relevant database point; AP undefined")
    scan = flags if top_k is None else flags[:top_k]
    denominator = total_relevant if top_k is None else min(total_relevant, top_k)
    hits = 0
    acc = 0.0
    for k, flag in enumerate(scan, start=1):
        if flag:
            hits += 1
            acc += hits / k
    return acc / denominator


def mean_average_precision(
    queries: CodeDatabase,
    db: CodeDatabase,
    truth: GroundTruth,
    top_k: int | None = None,
) -> float:
    """Mean AP over the queries that have at least one relevant database point.

    ``top_k`` truncates each ranking (AP@k with denominator min(R, k)); the
    default scores the full ranking.  Raises ValueError when no query has a
    relevant point.
    """
    if top_k is not None and top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    _check_eval_inputs(queries, db, truth)
    aps = []
    for q in range(queries.size):
        row = truth.relevance[q]
        if not row.any():
            continue
        order = np.argsort(_query_distances(queries.codes[:, q], db), kind="stable")
        flags = [bool(row[k]) for k in order]
        aps.append(_ap_from_flags(flags, top_k))
    if not aps:
        raise ValueError("no query has a relevant database point")
    return sum(aps) / len(aps)


def queries_without_relevant(truth: GroundTruth) -> int:
    """How many queries were excluded from MAP for lack of relevant points."""
    return int(np.sum(~truth.relevance.any(axis=1)))


def _check_eval_inputs(queries: CodeDatabase, db: CodeDatabase, truth: GroundTruth):
    if queries.code_length != db.code_length:
        raise ValueError(
            f"code lengths differ: queries {queries.code_length}, database {db.code_length}"
        )
    if truth.relevance.shape != (queries.size, db.size):
        raise ValueError(
            f"truth shape {truth.relevance.shape} does not match "
            f"({queries.size} queries, {db.size} database points)"
        )


def pr_curve(
    queries: CodeDatabase,
    db: CodeDatabase,
    truth: GroundTruth,
    average: str = "micro",
) -> list[PRPoint]:
    """Precision/recall/F at every Hamming radius 0..c.

    micro (default): counts are pooled over all queries before dividing.
    macro: per-query precision and recall are averaged; queries with no
    relevant point are excluded (their recall is undefined).
    Conventions: precision is 0 when nothing is retrieved and F is 0 when
    precision + recall is 0.
    """
    if average not in ("micro", "macro"):
        raise ValueError(f"average must be 'micro' or 'macro', got {average!r}")
    _check_eval_inputs(queries, db, truth)
    c = queries.code_length
    dots = queries.codes.astype(np.int64).T @ db.codes.astype(np.int64)
    distances = (c - dots) // 2                       # (n_queries, m)
    relevance = truth.relevance

    points = []
    for radius in range(c + 1):
        within = distances <= radius
        if average == "micro":
            retrieved = int(within.sum())
            retrieved_relevant = int((within & relevance).sum())
            total_relevant = int(relevance.sum())
            precision = retrieved_relevant / retrieved if retrieved else 0.0
            recall = retrieved_relevant / total_relevant if total_relevant else 0.0
        else:
            precisions, recalls = [], []
            for q in range(queries.size):
                rel = relevance[q]
                if not rel.any():
                    continue
                ret = int(within[q].sum())
                ret_rel = int((within[q] & rel).sum())
                precisions.append(ret_rel / ret if ret else 0.0)
                recalls.append(ret_rel / int(rel.sum()))
            precision = sum(precisions) / len(precisions) if precisions else 0.0
            recall = sum(recalls) / len(recalls) if recalls else 0.0
        f_measure = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        points.append(PRPoint(radius, precision, recall, f_measure))
    return points


def save_codes(db: CodeDatabase, path: str | os.PathLike) -> None:
    """Packed binary code file plus a ``<path>.ids`` sidecar.

    Layout (little-endian): magic b"CMHC", uint16 version, uint32 code
    length c, uint32 point count m, then m columns of ceil(c/8) bytes each.
    Bit k of a column (LSB-first within each byte) is 1 where the code entry
    is +1 and 0 where it is -1.  The sidecar lists one id per line, in
    column order.
    """
    for point_id in db.ids:
        if "\n" in point_id or "\r" in point_id:
            raise ValueError(f"id {point_id!r} contains a newline; sidecar is line-oriented")
    bits = (db.codes == 1).astype(np.uint8)
    packed = np.packbits(bits, axis=0, bitorder="little")  # (ceil(c/8), m)
    with open(path, "wb") as fh:
        fh.write(_CODE_HEADER.pack(CODE_MAGIC, CODE_VERSION, db.code_length, db.size))
        fh.write(packed.T.tobytes())
    with open(str(path) + ".ids", "w", encoding="utf-8", newline="\n") as fh:
        for point_id in db.ids:
            fh.write(point_id + "\n")


def load_codes(path: str | os.PathLike) -> CodeDatabase:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CODE_HEADER.size:
        raise ValueError(f"{path}: truncated code file (no complete header)")
    magic, version, c, m = _CODE_HEADER.unpack_from(blob)
    if magic != CODE_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {CODE_MAGIC!r}")
    if version != CODE_VERSION:
        raise ValueError(f"{path}: unsupported code file version {version}")
    if c < 1:
        raise ValueError(f"{path}: declared code length {c} is invalid")
    bytes_per_column = (c + 7) // 8
    expected = _CODE_HEADER.size + bytes_per_column * m
    if len(blob) != expected:
        raise ValueError(
            f"{path}: file has {len(blob)} bytes, header implies {expected} (truncated or padded)"
        )
    packed = np.frombuffer(blob, dtype=np.uint8, offset=_CODE_HEADER.size)
    packed = packed.reshape(m, bytes_per_column).T
    bits = np.unpackbits(packed, axis=0, count=c, bitorder="little")
    codes = np.where(bits == 1, 1, -1).astype(np.int8)
    ids_path = str(path) + ".ids"
    if not os.path.exists(ids_path):
        raise ValueError(f"{path}: missing id sidecar {ids_path}")
    with open(ids_path, "r", encoding="utf-8") as fh:
        ids = [line.rstrip("\n") for line in fh.readlines()]
    if ids and ids[-1] == "":
        ids.pop()
    if len(ids) != m:
        raise ValueError(f"{ids_path}: {len(ids)} ids for {m} code columns")
    return CodeDatabase(codes.reshape(c, m), ids)
