"""Evaluation: graph edit distance, node-set F1 and retrieval medR / R@K."""

from __future__ import annotations

import heapq
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PoolTooLarge, TooLargeForExact
from .graph import CookingGraph
from .ir import EntityKind, Lit, Program

MAX_EXACT_NODES = 12
DEFAULT_KS = (1, 5, 10)


@dataclass(frozen=True)
class EditCostModel:
    node_insert: float = 1.0
    node_delete: float = 1.0
    node_substitute: float = 1.0
    edge_insert: float = 1.0
    edge_delete: float = 1.0
    # substitution is always limited to one node kind; by default also to one role
    same_role_only: bool = True

    def __post_init__(self):
        costs = (self.node_insert, self.node_delete, self.node_substitute,
                 self.edge_insert, self.edge_delete)
        if any(c < 0 for c in costs):
            raise ValueError("edit costs must be non-negative")
        if self.node_substitute > self.node_insert + self.node_delete:
            raise ValueError("node_substitute must not exceed node_insert + node_delete")

    @property
    def symmetric(self) -> bool:
        return self.node_insert == self.node_delete and self.edge_insert == self.edge_delete

    @classmethod
    def load(cls, path) -> "EditCostModel":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, p: float, r: float) -> "PRF":
        return cls(p, r, 0.0 if p + r == 0 else 2 * p * r / (p + r))


@dataclass(frozen=True)
class RetrievalReport:
    medR: float
    recall_at: dict[int, float] = field(default_factory=dict)

    def to_dict(self):
        return {"medR": self.medR, "recall_at": {str(k): v for k, v in self.recall_at.items()}}

    def table(self) -> str:
        head = f"{'medR':>8}" + "".join(f"{'R@' + str(k):>8}" for k in self.recall_at)
        row = f"{self.medR:8.2f}" + "".join(f"{v:8.2f}" for v in self.recall_at.values())
        return head + "\n" + row


# --------------------------------------------------------------------------
# graph edit distance


class _GedProblem:
    def __init__(self, g1: CookingGraph, g2: CookingGraph, c: EditCostModel):
        self.c = c
        self.labels1 = [(n.kind, n.role, n.label) for n in g1.nodes]
        self.labels2 = [(n.kind, n.role, n.label) for n in g2.nodes]
        idx1 = {n.id: i for i, n in enumerate(g1.nodes)}
        idx2 = {n.id: i for i, n in enumerate(g2.nodes)}
        self.e1 = {(idx1[a], idx1[b]) for a, b in g1.edges}
        self.e2 = {(idx2[a], idx2[b]) for a, b in g2.edges}
        self.n1, self.n2 = len(self.labels1), len(self.labels2)

    def klass(self, label):
        return (label[0], label[1]) if self.c.same_role_only else label[0]

    def substitution(self, i: int, j: int) -> float | None:
        a, b = self.labels1[i], self.labels2[j]
        if a == b:
            return 0.0
        if self.klass(a) != self.klass(b):
            return None
        return self.c.node_substitute

    def step(self, mapping: tuple[int, ...], v: int) -> float | None:
        """Cost of mapping g1 node ``len(mapping)`` to ``v`` (-1 = delete)."""
        c = self.c
        k = len(mapping)
        if v < 0:
            cost = c.node_delete
        else:
            cost = self.substitution(k, v)
            if cost is None:
                return None
        for i, m in enumerate(mapping):
            for a, b, x, y in ((i, k, m, v), (k, i, v, m)):
                has1 = (a, b) in self.e1
                has2 = x >= 0 and y >= 0 and (x, y) in self.e2
                if has1 and not has2:
                    cost += c.edge_delete
                elif has2 and not has1:
                    cost += c.edge_insert
        return cost

    def completion(self, used: int) -> float:
        """Insert every unused g2 node and every g2 edge touching one."""
        c = self.c
        free = [j for j in range(self.n2) if not used >> j & 1]
        cost = c.node_insert * len(free)
        for a, b in self.e2:
            if not (used >> a & 1 and used >> b & 1):
                cost += c.edge_insert
        return cost

    def lower_bound(self, k: int, used: int) -> float:
        """Node-label lower bound for the unprocessed part (edges ignored)."""
        c = self.c
        rest1 = Counter(self.labels1[k:])
        rest2 = Counter(self.labels2[j] for j in range(self.n2) if not used >> j & 1)
        by_class1: Counter = Counter()
        by_class2: Counter = Counter()
        for lab, cnt in rest1.items():
            by_class1[self.klass(lab)] += cnt - min(cnt, rest2.get(lab, 0))
        for lab, cnt in rest2.items():
            by_class2[self.klass(lab)] += cnt - min(cnt, rest1.get(lab, 0))
        sub = min(c.node_substitute, c.node_insert + c.node_delete)
        bound = 0.0
        for cls in set(by_class1) | set(by_class2):
            a, b = by_class1[cls], by_class2[cls]
            m = min(a, b)
            bound += m * sub + (a - m) * c.node_delete + (b - m) * c.node_insert
        return bound

    def children(self, g: float, mapping: tuple[int, ...], used: int):
        for v in itertools.chain(range(self.n2), (-1,)):
            if v >= 0 and used >> v & 1:
                continue
            step = self.step(mapping, v)
            if step is None:
                continue
            new_used = used | (1 << v) if v >= 0 else used
            new_map = mapping + (v,)
            g2 = g + step
            if len(new_map) == self.n1:
                g2 += self.completion(new_used)
                yield g2, g2, new_map, new_used
            else:
                yield g2 + self.lower_bound(len(new_map), new_used), g2, new_map, new_used


def _astar(prob: _GedProblem) -> float:
    if prob.n1 == 0:
        return prob.completion(0)
    tie = itertools.count()
    heap = [(prob.lower_bound(0, 0), 0, next(tie), 0.0, (), 0)]
    while heap:
        f, _, _, g, mapping, used = heapq.heappop(heap)
        if len(mapping) == prob.n1:
            return g
        for f2, g2, m2, u2 in prob.children(g, mapping, used):
            heapq.heappush(heap, (f2, -len(m2), next(tie), g2, m2, u2))
    raise AssertionError("search space exhausted")  # deletion is always possible


def _beam(prob: _GedProblem, width: int) -> float:
    if prob.n1 == 0:
        return prob.completion(0)
    level = [(prob.lower_bound(0, 0), 0.0, (), 0)]
    for _ in range(prob.n1):
        nxt = [child for f, g, m, u in level for child in prob.children(g, m, u)]
        nxt.sort(key=lambda s: (s[0], s[2]))
        level = nxt[:width]
    return min(g for _, g, _, _ in level)


def graph_edit_distance(g1: CookingGraph, g2: CookingGraph, costs: EditCostModel | None = None,
                        mode: str = "exact", beam_width: int = 64,
                        functions_only: bool = False) -> float:
    """Minimum-cost edit path turning ``g1`` into ``g2``.

    Node labels compare as (node kind, role, value). ``mode="exact"`` runs a
    best-first search over partial node matchings and is limited to graphs of
    at most 12 nodes; ``mode="beam"`` keeps ``beam_width`` partial matchings per
    level and returns an upper bound.
    """
    costs = costs or EditCostModel()
    if functions_only:
        g1, g2 = g1.functions_only(), g2.functions_only()
    prob = _GedProblem(g1, g2, costs)
    if mode == "exact":
        if max(prob.n1, prob.n2) > MAX_EXACT_NODES:
            raise TooLargeForExact(
                f"exact GED supports at most {MAX_EXACT_NODES} nodes, got {max(prob.n1, prob.n2)}")
        return _astar(prob)
    if mode == "beam":
        if beam_width < 1:
            raise ValueError("beam width must be >= 1")
        return _beam(prob, beam_width)
    raise ValueError(f"unknown GED mode {mode!r}")


# --------------------------------------------------------------------------
# node-set F1

F1_KINDS = (EntityKind.INGREDIENT, EntityKind.ACTION, EntityKind.TOOL)


def node_values(p: Program, kind: EntityKind) -> set[str]:
    if kind is EntityKind.ACTION:
        return {c.action.value for c in p.commands}
    return {a.entity.value for c in p.commands for _, a in c.args()
            if isinstance(a, Lit) and a.entity.kind is kind}


def set_prf(pred: set, gt: set) -> PRF:
    if not pred and not gt:
        return PRF(1.0, 1.0, 1.0)
    if not pred or not gt:
        return PRF(0.0, 0.0, 0.0)
    hit = len(pred & gt)
    return PRF.from_pr(hit / len(pred), hit / len(gt))


def node_set_f1(pred: Program, gt: Program, kind: EntityKind | str) -> PRF:
    if isinstance(kind, str):
        kind = EntityKind.parse(kind)
    if kind not in F1_KINDS:
        raise ValueError(f"F1 is defined for ingredient, action and tool nodes, not {kind.value}")
    return set_prf(node_values(pred, kind), node_values(gt, kind))


# --------------------------------------------------------------------------
# retrieval


def true_match_ranks(sim: np.ndarray) -> np.ndarray:
    """1-based rank of the diagonal entry in each row; ties go to the lower column index."""
    sim = np.asarray(sim)
    diag = np.diag(sim)[:, None]
    cols = np.arange(sim.shape[1])[None, :]
    rows = np.arange(sim.shape[0])[:, None]
    ahead = (sim > diag) | ((sim == diag) & (cols < rows))
    return ahead.sum(axis=1) + 1


def retrieval_metrics(sim, trials: int = 10, pool: int = 1000, seed: int = 0,
                      ks: Sequence[int] = DEFAULT_KS, direction: str = "image2recipe") -> RetrievalReport:
    """medR and R@K averaged over ``trials`` random pools of ``pool`` query/target pairs.

    Rows of ``sim`` are images and columns recipes; ``direction="recipe2image"``
    ranks images for each recipe query instead.
    """
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {sim.shape}")
    if direction == "recipe2image":
        sim = sim.T
    elif direction != "image2recipe":
        raise ValueError(f"unknown direction {direction!r}")
    n = sim.shape[0]
    if pool > n:
        raise PoolTooLarge(f"pool of {pool} exceeds the {n} available pairs")
    if trials < 1 or pool < 1:
        raise ValueError("trials and pool must be >= 1")
    rng = np.random.default_rng(seed)
    medrs, recalls = [], {k: [] for k in ks}
    for _ in range(trials):
        idx = np.sort(rng.choice(n, size=pool, replace=False))
        ranks = true_match_ranks(sim[np.ix_(idx, idx)])
        medrs.append(float(np.median(ranks)))
        for k in ks:
            recalls[k].append(100.0 * float(np.mean(ranks <= k)))
    return RetrievalReport(float(np.mean(medrs)), {k: float(np.mean(v)) for k, v in recalls.items()})

