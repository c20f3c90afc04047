"""Vocabulary construction: K-means over term vectors, then nearest-cluster merging."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch
from .ir import EntityKind, Vocabulary

MAX_ITER = 100
FEATURE_MAGIC = b"CKFT"


@dataclass(frozen=True, eq=False)
class FeatureTable:
    terms: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        terms = tuple(self.terms)
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(terms):
            raise DimensionMismatch(
                f"expected {len(terms)} vectors of one dimension, got shape {vectors.shape}")
        if vectors.shape[1] < 1:
            raise DimensionMismatch("vector dimension must be >= 1")
        if len(set(terms)) != len(terms):
            raise ValueError("terms must be unique")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[str, Sequence[float]]]) -> "FeatureTable":
        dims = {len(v) for _, v in rows}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed vector dimensions {sorted(dims)}")
        return cls(tuple(t for t, _ in rows), np.array([list(v) for _, v in rows], dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class ClusterSet:
    terms: tuple[str, ...]
    vectors: np.ndarray
    assignment: np.ndarray  # cluster id per term
    centroids: np.ndarray  # one row per cluster id
    names: dict[int, str]
    history: tuple[float, ...] = field(default=())  # distortion after each assignment step

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, cid: int) -> list[str]:
        return [t for t, a in zip(self.terms, self.assignment) if a == cid]

    def distortion(self) -> float:
        return _distortion(self.vectors, self.centroids, self.assignment)

    def same_as(self, other: "ClusterSet") -> bool:
        return (self.terms == other.terms
                and np.array_equal(self.assignment, other.assignment)
                and np.array_equal(self.centroids, other.centroids)
                and self.names == other.names)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _distortion(x, c, assign) -> float:
    return float(((x - c[assign]) ** 2).sum())


def _rep(terms, x, idx, centroid) -> str:
    """Member closest to the centroid; ties go to the lexicographically smaller term."""
    d = ((x[idx] - centroid) ** 2).sum(axis=1)
    return min(zip(d.tolist(), (terms[i] for i in idx)))[1]


def _representatives(terms, x, centroids, assign) -> dict[int, str]:
    names = {}
    for cid in range(len(centroids)):
        idx = np.flatnonzero(assign == cid)
        if len(idx):
            names[cid] = _rep(terms, x, idx, centroids[cid])
    return names


def _farthest_first(x: np.ndarray, k: int, start: int) -> list[int]:
    chosen = [start]
    mind = ((x - x[start]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, ((x - x[nxt]) ** 2).sum(axis=1))
    return chosen


def kmeans(f: FeatureTable, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> ClusterSet:
    """Lloyd's algorithm with farthest-first seeding from a seeded start point.

    Stops when assignments no longer change or after ``max_iter`` rounds. An
    empty cluster is re-seeded with the point farthest from its centroid.
    """
    x = f.vectors
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = x[_farthest_first(x, k, int(rng.integers(n)))].copy()
    assign = np.full(n, -1)
    history = []
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(x, centroids), axis=1)
        history.append(_distortion(x, centroids, new))
        if np.array_equal(new, assign):
            break
        assign = new
        for cid in range(k):
            members = assign == cid
            if members.any():
                centroids[cid] = x[members].mean(axis=0)
        for cid in range(k):
            if not (assign == cid).any():
                d = ((x - centroids[assign]) ** 2).sum(axis=1)
                far = int(np.argmax(d))
                old = assign[far]
                assign[far] = cid
                centroids[cid] = x[far]
                if (assign == old).any():
                    centroids[old] = x[assign == old].mean(axis=0)
    return ClusterSet(f.terms, x, assign, centroids,
                      _representatives(f.terms, x, centroids, assign), tuple(history))


def iterative_merge(c: ClusterSet, threshold: float,
                    confirm: Callable[[str, str, float], bool] | None = None) -> ClusterSet:
    """Repeatedly merge the globally closest pair of clusters while closer than ``threshold``.

    Ties go to the lexicographically smallest (id, id) pair. With ``confirm``,
    each candidate merge is offered to the callback; a rejected pair is never
    offered again.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    groups = {cid: list(np.flatnonzero(c.assignment == cid)) for cid in range(c.k)}
    groups = {cid: m for cid, m in groups.items() if m}
    cents = {cid: c.centroids[cid].astype(np.float64) for cid in groups}
    x = c.vectors
    rejected: set[tuple[int, int]] = set()
    while len(groups) > 1:
        ids = sorted(groups)
        best = None
        for ai, a in enumerate(ids):
            for b in ids[ai + 1:]:
                if (a, b) in rejected:
                    continue
                d = float(np.sqrt(((cents[a] - cents[b]) ** 2).sum()))
                if best is None or d < best[0]:
                    best = (d, a, b)
        if best is None or not best[0] < threshold:
            break
        d, a, b = best
        if confirm is not None:
            if not confirm(_rep(c.terms, x, groups[a], cents[a]),
                           _rep(c.terms, x, groups[b], cents[b]), d):
                rejected.add((a, b))
                continue
        na, nb = len(groups[a]), len(groups[b])
        cents[a] = (na * cents[a] + nb * cents[b]) / (na + nb)
        groups[a] = sorted(groups[a] + groups[b])
        del groups[b], cents[b]
        rejected = {p for p in rejected if b not in p and a not in p}

    relabel = {old: new for new, old in enumerate(sorted(groups))}
    assign = np.empty(len(c.terms), dtype=int)
    for old, m in groups.items():
        assign[m] = relabel[old]
    centroids = np.array([cents[old] for old in sorted(groups)])
    return ClusterSet(c.terms, x, assign, centroids,
                      _representatives(c.terms, x, centroids, assign))


def min_centroid_distance(c: ClusterSet) -> float:
    if c.k < 2:
        return float("inf")
    d = np.sqrt(_sq_dists(c.centroids, c.centroids))
    return float(d[np.triu_indices(c.k, 1)].min())


def build_vocabulary(c: ClusterSet, kind: EntityKind) -> Vocabulary:
    """Cluster representatives become canonical terms, other members their synonyms."""
    canonical, synonyms = [], {}
    for cid in range(c.k):
        if cid not in c.names:
            continue
        rep = c.names[cid]
        canonical.append(rep)
        for t in c.members(cid):
            if t != rep:
                synonyms[t] = rep
    return Vocabulary({kind: canonical}, {kind: synonyms})


# --------------------------------------------------------------------------
# feature table files


def write_features(f: FeatureTable, path, binary: bool = False) -> None:
    if binary:
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC + struct.pack("<II", f.dim, len(f.terms)))
            for term, vec in zip(f.terms, f.vectors):
                raw = term.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)) + raw)
                fh.write(np.asarray(vec, dtype="<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{f.dim} {len(f.terms)}\n")
        for term, vec in zip(f.terms, f.vectors):
            fh.write(term + "\t" + " ".join(repr(float(v)) for v in vec) + "\n")


def read_features(path) -> FeatureTable:
    """Read a feature table, detecting the binary variant by its magic bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(FEATURE_MAGIC):
        d, n = struct.unpack_from("<II", data, 4)
        off, terms, vecs = 12, [], []
        for _ in range(n):
            (ln,) = struct.unpack_from("<I", data, off)
            off += 4
            terms.append(data[off:off + ln].decode("utf-8"))
            off += ln
            vecs.append(np.frombuffer(data, dtype="<f4", count=d, offset=off))
            off += 4 * d
        if off != len(data):
            raise DimensionMismatch("trailing bytes after feature records")
        return FeatureTable(tuple(terms), np.array(vecs, dtype=np.float64).reshape(n, d))
    lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DimensionMismatch("empty feature file")
    d, n = (int(t) for t in lines[0].split())
    rows = []
    for ln in lines[1:]:
        if "\t" not in ln:
            raise DimensionMismatch(f"record without a tab separator: {ln[:40]!r}")
        term, rest = ln.split("\t", 1)
        vals = [float(t) for t in rest.split()]
        if len(vals) != d:
            raise DimensionMismatch(f"term {term!r} has {len(vals)} values, header says {d}")
        rows.append((term, vals))
    if len(rows) != n:
        raise DimensionMismatch(f"header says {n} records, found {len(rows)}")
    return FeatureTable(tuple(t for t, _ in rows), np.array([v for _, v in rows]).reshape(n, d))
