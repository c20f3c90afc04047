"""Shared fixtures, random generators and brute-force oracles for the test suite."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from cookir.graph import ENTITY, FUNCTION, CookingGraph, FunctionDag, Node
from cookir.ir import ROLES, Command, Entity, EntityKind, Lit, Program, Var, Vocabulary, var_name

FIXTURES = Path(__file__).parent / "fixtures"
KITCHEN_VOCAB = FIXTURES / "kitchen_vocab.json"
FULL_VOCAB = FIXTURES / "full_size_vocab.json"
PASTA = FIXTURES / "pasta.prog"
BAKE = FIXTURES / "bake_chicken.prog"
CHICKEN = FIXTURES / "chicken.json"

_vocab_cache: dict[str, Vocabulary] = {}


def kitchen_vocab() -> Vocabulary:
    if "kitchen" not in _vocab_cache:
        _vocab_cache["kitchen"] = Vocabulary.load(KITCHEN_VOCAB)
    return _vocab_cache["kitchen"]


def _lit(rng: random.Random, vocab: Vocabulary, kind: EntityKind) -> Lit:
    return Lit(Entity(kind, rng.choice(vocab.terms(kind))))


def random_program(rng: random.Random, vocab: Vocabulary | None = None, max_len: int = 12) -> Program:
    """A valid program of 1..max_len commands over the vocabulary's canonical terms."""
    vocab = vocab or kitchen_vocab()
    n = rng.randint(1, max_len)
    commands = []
    for i in range(n):
        inputs = []
        for _ in range(rng.randint(0, 3)):
            if i and rng.random() < 0.5:
                inputs.append(Var(rng.randrange(i)))
            else:
                inputs.append(_lit(rng, vocab, EntityKind.INGREDIENT))
        params = {}
        for role, kind in ROLES.items():
            if vocab.terms(kind) and rng.random() < 0.3:
                params[role] = tuple(_lit(rng, vocab, kind) for _ in range(rng.randint(1, 2)))
        label = _lit(rng, vocab, EntityKind.OUTPUT).entity if rng.random() < 0.2 else None
        action = _lit(rng, vocab, EntityKind.ACTION).entity
        commands.append(Command(action, tuple(inputs), params, var_name(i, n), label))
    return Program(tuple(commands))


def random_dag(rng: random.Random, max_n: int = 8, p: float | None = None) -> FunctionDag:
    n = rng.randint(1, max_n)
    p = rng.random() if p is None else p
    perm = list(range(n))
    rng.shuffle(perm)  # hide the topological order from the node ids
    edges = {(perm[a], perm[b]) for a in range(n) for b in range(a + 1, n) if rng.random() < p}
    return FunctionDag(n, frozenset(edges))


def random_graph(rng: random.Random, max_nodes: int = 6) -> CookingGraph:
    """Small labelled cooking graph: function chain/DAG plus entity leaves."""
    total = rng.randint(1, max_nodes)
    nf = rng.randint(1, total)
    nodes = [Node(i, FUNCTION, rng.choice(["Mix", "Cook", "Bake"]), "action") for i in range(nf)]
    edges = {(a, b) for a in range(nf) for b in range(a + 1, nf) if rng.random() < 0.4}
    for i in range(nf, total):
        role = rng.choice(["ingredient", "tool"])
        label = rng.choice(["salt", "oil"] if role == "ingredient" else ["pan", "oil"])
        nodes.append(Node(i, ENTITY, label, role))
        edges.add((i, rng.randrange(nf)))
    return CookingGraph(tuple(nodes), tuple(sorted(edges)), nf - 1)


def brute_force_extensions(g: FunctionDag) -> set[tuple[int, ...]]:
    out = set()
    for perm in itertools.permutations(range(g.n)):
        pos = {v: i for i, v in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in g.edges):
            out.add(perm)
    return out


def _mappings(n1: int, n2: int):
    """Every injective partial map from range(n1) into range(n2); None marks deletion."""
    def rec(i, used):
        if i == n1:
            yield ()
            return
        for rest in rec(i + 1, used):
            yield (None,) + rest
        for j in range(n2):
            if j not in used:
                for rest in rec(i + 1, used | {j}):
                    yield (j,) + rest
    yield from rec(0, frozenset())


def brute_force_ged(g1: CookingGraph, g2: CookingGraph, ins=1.0, dele=1.0, sub=1.0,
                    e_ins=1.0, e_del=1.0) -> float:
    """Exhaustive GED: minimum over every node mapping of the induced edit cost."""
    l1 = [(n.kind, n.role, n.label) for n in g1.nodes]
    l2 = [(n.kind, n.role, n.label) for n in g2.nodes]
    i1 = {n.id: i for i, n in enumerate(g1.nodes)}
    i2 = {n.id: i for i, n in enumerate(g2.nodes)}
    e1 = {(i1[a], i1[b]) for a, b in g1.edges}
    e2 = {(i2[a], i2[b]) for a, b in g2.edges}
    best = float("inf")
    for m in _mappings(len(l1), len(l2)):
        cost = 0.0
        ok = True
        for u, v in enumerate(m):
            if v is None:
                cost += dele
            elif l1[u] != l2[v]:
                if l1[u][:2] != l2[v][:2]:
                    ok = False
                    break
                cost += sub
        if not ok:
            continue
        mapped = {u: v for u, v in enumerate(m) if v is not None}
        cost += ins * (len(l2) - len(mapped))
        kept = {(mapped[a], mapped[b]) for a, b in e1 if a in mapped and b in mapped} & e2
        cost += e_del * (len(e1) - len(kept)) + e_ins * (len(e2) - len(kept))
        best = min(best, cost)
    return best
