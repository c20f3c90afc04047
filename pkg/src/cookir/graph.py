"""Cooking graphs and valid command orderings.

``to_graph`` lowers a :class:`~cookir.ir.Program` into a graph with one
function node per command and one entity node per literal argument. The
function-only projection (:class:`FunctionDag`) determines which command
orderings are executable; those orderings are the linear extensions of the
DAG.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

from .errors import (CapExceeded, CyclicGraph, GraphError, InvalidProgram, MultipleSinks,
                     NotAPermutation, TooLarge)
from .ir import (ROLE_OF_KIND, Command, Entity, EntityKind, Lit, Program, SymbolTable, Var,
                 tokenize_program, validate_program, var_name)

FUNCTION = "function"
ENTITY = "entity"
ACTION_ROLE = EntityKind.ACTION.value

DEFAULT_CAP = 10_000
MAX_COUNT_NODES = 20
_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # FUNCTION or ENTITY
    label: str
    role: str  # "action" for functions, else the entity kind value
    output: str | None = None  # output label of a function node

    def to_dict(self):
        d = {"id": self.id, "kind": self.kind, "label": self.label, "role": self.role}
        if self.output is not None:
            d["output"] = self.output
        return d


@dataclass(frozen=True, eq=False)
class CookingGraph:
    """Function and entity nodes plus consumption edges.

    Equality ignores edge order and entity node ids, so two programs that list
    the same inputs in a different order lower to equal graphs.
    """

    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int], ...]
    sink: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))

    def _key(self):
        by_id = self._by_id()
        funcs = frozenset(n for n in self.nodes if n.kind == FUNCTION)
        fedges = frozenset(e for e in self.edges
                           if by_id[e[0]].kind == FUNCTION and by_id[e[1]].kind == FUNCTION)
        targets: dict[int, list[int]] = {}
        for a, b in self.edges:
            if by_id[a].kind != FUNCTION:
                targets.setdefault(a, []).append(b)
        ents = Counter((n.label, n.role, n.output, tuple(sorted(targets.get(n.id, ()))))
                       for n in self.nodes if n.kind != FUNCTION)
        return funcs, fedges, frozenset(ents.items()), self.sink

    def __eq__(self, other):
        if not isinstance(other, CookingGraph):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def node(self, node_id: int) -> Node:
        return self._by_id()[node_id]

    def _by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @property
    def function_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == FUNCTION]

    @property
    def entity_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == ENTITY]

    def function_edges(self) -> list[tuple[int, int]]:
        by_id = self._by_id()
        return [(a, b) for a, b in self.edges
                if by_id[a].kind == FUNCTION and by_id[b].kind == FUNCTION]

    def functions_only(self) -> "CookingGraph":
        keep = {n.id for n in self.function_nodes}
        return CookingGraph(tuple(n for n in self.nodes if n.id in keep),
                            tuple(e for e in self.edges if e[0] in keep and e[1] in keep), self.sink)

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes],
                "edges": [list(e) for e in self.edges],
                "sink": self.sink}

    @classmethod
    def from_dict(cls, d: dict) -> "CookingGraph":
        try:
            nodes = tuple(Node(int(n["id"]), n["kind"], n["label"], n["role"], n.get("output"))
                          for n in d["nodes"])
            edges = tuple((int(a), int(b)) for a, b in d["edges"])
        except (KeyError, TypeError, ValueError) as e:
            raise GraphError(f"bad graph document: {e!r}") from None
        ids = {n.id for n in nodes}
        if len(ids) != len(nodes):
            raise GraphError("duplicate node ids")
        for a, b in edges:
            if a not in ids or b not in ids:
                raise GraphError(f"edge ({a}, {b}) references a missing node")
        sink = d.get("sink")
        return cls(nodes, edges, None if sink is None else int(sink))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_dot(self, merge_entities: bool = False) -> str:
        return to_dot(self, merge_entities=merge_entities)


@dataclass(frozen=True)
class FunctionDag:
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                raise GraphError(f"bad edge ({a}, {b}) for {self.n} nodes")

    def predecessors(self) -> list[int]:
        """Bitmask of direct predecessors per node."""
        preds = [0] * self.n
        for a, b in self.edges:
            preds[b] |= 1 << a
        return preds

    def is_acyclic(self) -> bool:
        return _kahn(self.n, self.edges) is not None


@dataclass(frozen=True)
class CandidateSet:
    permutations: tuple[tuple[int, ...], ...]

    @property
    def beta(self) -> int:
        return len(self.permutations) - 1

    def __len__(self):
        return len(self.permutations)

    def __iter__(self):
        return iter(self.permutations)


# --------------------------------------------------------------------------
# lowering


def to_graph(p: Program) -> CookingGraph:
    report = validate_program(p)
    if not report.ok:
        raise InvalidProgram(report)
    n = len(p.commands)
    nodes = [Node(i, FUNCTION, c.action.value, ACTION_ROLE,
                  None if c.output_label is None else c.output_label.value)
             for i, c in enumerate(p.commands)]
    edges: list[tuple[int, int]] = []
    next_id = n
    for i, c in enumerate(p.commands):
        seen: set = set()
        for _, a in c.args():
            if isinstance(a, Var):
                key = ("var", a.index)
                if key not in seen:
                    edges.append((a.index, i))
            else:
                key = (a.entity.kind, a.entity.value)
                if key not in seen:
                    nodes.append(Node(next_id, ENTITY, a.entity.value, a.entity.kind.value))
                    edges.append((next_id, i))
                    next_id += 1
            seen.add(key)
    return CookingGraph(tuple(nodes), tuple(edges), n - 1)


def function_dag(x: Program | CookingGraph) -> FunctionDag:
    """Function-node projection; node ``i`` is the i-th function node in id order."""
    if isinstance(x, Program):
        return FunctionDag(len(x.commands),
                           {(j, i) for i, c in enumerate(x.commands) for j in c.var_refs()})
    funcs = sorted(n.id for n in x.function_nodes)
    index = {fid: k for k, fid in enumerate(funcs)}
    return FunctionDag(len(funcs), {(index[a], index[b]) for a, b in x.function_edges()})


def _kahn(n: int, edges, pinned_last: int | None = None) -> list[int] | None:
    """Topological order with min-id tie-break; ``pinned_last`` is held back while possible."""
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    held = False
    while ready:
        v = heapq.heappop(ready)
        if v == pinned_last and ready:
            held = True
            continue
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
        if held and not ready:
            heapq.heappush(ready, pinned_last)
            held = False
    if held:
        order.append(pinned_last)
    return order if len(order) == n else None


def from_graph(g: CookingGraph) -> Program:
    """Rebuild a program, ordering commands by the canonical linear extension."""
    by_id = g._by_id()
    funcs = sorted(n.id for n in g.function_nodes)
    if not funcs:
        raise GraphError("graph has no function nodes")
    index = {fid: k for k, fid in enumerate(funcs)}
    for a, b in g.edges:
        if by_id[b].kind != FUNCTION:
            raise GraphError(f"edge ({a}, {b}) points into an entity node")
    fedges = [(index[a], index[b]) for a, b in g.function_edges()]

    has_out = {a for a, _ in fedges}
    terminals = [k for k in range(len(funcs)) if k not in has_out]
    if g.sink is not None:
        if g.sink not in index:
            raise GraphError(f"sink {g.sink} is not a function node")
        sink = index[g.sink]
        if sink in has_out:
            raise MultipleSinks(f"designated sink {g.sink} feeds other functions")
    elif len(terminals) == 1:
        sink = terminals[0]
    else:
        sink = None

    order = _kahn(len(funcs), fedges, pinned_last=sink)
    if order is None:
        raise CyclicGraph("function nodes contain a cycle")
    if sink is None:
        raise MultipleSinks(f"{len(terminals)} function nodes have no outgoing function edge")

    pos = {k: i for i, k in enumerate(order)}
    n = len(order)
    inputs: list[list] = [[] for _ in range(n)]
    params: list[dict[str, list]] = [{} for _ in range(n)]
    for a, b in g.edges:
        dst = pos[index[b]]
        src = by_id[a]
        if src.kind == FUNCTION:
            inputs[dst].append(Var(pos[index[a]]))
            continue
        kind = EntityKind.parse(src.role)
        arg = Lit(Entity(kind, src.label))
        if kind in ROLE_OF_KIND:
            params[dst].setdefault(ROLE_OF_KIND[kind], []).append(arg)
        else:
            inputs[dst].append(arg)
    commands = []
    for i, k in enumerate(order):
        fn = by_id[funcs[k]]
        label = None if fn.output is None else Entity(EntityKind.OUTPUT, fn.output)
        commands.append(Command(Entity(EntityKind.ACTION, fn.label), tuple(inputs[i]),
                                {r: tuple(v) for r, v in params[i].items()}, var_name(i, n), label))
    return Program(tuple(commands))


def to_dot(g: CookingGraph, merge_entities: bool = False) -> str:
    """Graphviz source; functions green boxes, entities cyan ellipses."""
    def esc(s: str) -> str:
        return s.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph cooking {", "  rankdir=LR;"]
    alias: dict[int, str] = {}
    for nd in g.nodes:
        if nd.kind == FUNCTION:
            name = f"f{nd.id}"
            lines.append(f'  {name} [label="{esc(nd.label)}", shape=box, style=filled, fillcolor=palegreen];')
        else:
            name = f"e_{nd.role}_{esc(nd.label)}" if merge_entities else f"e{nd.id}"
            if merge_entities:
                name = '"' + name + '"'
            if name in alias.values():
                alias[nd.id] = name
                continue
            lines.append(f'  {name} [label="{esc(nd.label)}", shape=ellipse, style=filled, '
                         f'fillcolor={"cyan" if nd.role == "ingredient" else "lightblue"}];')
        alias[nd.id] = name
    for a, b in g.edges:
        lines.append(f"  {alias[a]} -> {alias[b]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# orderings


def is_valid_sequence(g: FunctionDag, order: Sequence[int]) -> bool:
    order = list(order)
    if sorted(order) != list(range(g.n)):
        raise NotAPermutation(f"{order} is not a permutation of 0..{g.n - 1}")
    pos = {v: i for i, v in enumerate(order)}
    return all(pos[a] < pos[b] for a, b in g.edges)


def count_linear_extensions(g: FunctionDag) -> int:
    """Exact count by dynamic programming over downsets (bitmask states)."""
    if g.n > MAX_COUNT_NODES:
        raise TooLarge(f"{g.n} nodes exceeds the downset table limit of {MAX_COUNT_NODES}")
    if not g.is_acyclic():
        raise CyclicGraph("graph contains a cycle")
    preds = g.predecessors()
    full = (1 << g.n) - 1
    # ways[S]: orderings of the downset S; states are expanded by popcount layer
    layer = {0: 1}
    for _ in range(g.n):
        nxt: dict[int, int] = {}
        for mask, ways in layer.items():
            for v in range(g.n):
                bit = 1 << v
                if not mask & bit and preds[v] & mask == preds[v]:
                    m2 = mask | bit
                    nxt[m2] = nxt.get(m2, 0) + ways
        layer = nxt
    total = layer.get(full, 0)
    if total > _INT64_MAX:
        raise TooLarge("count overflows a 64-bit integer")
    return total


def iter_linear_extensions(g: FunctionDag) -> Iterator[tuple[int, ...]]:
    """All linear extensions in lexicographic order."""
    preds = g.predecessors()
    n = g.n
    order: list[int] = []

    def rec(mask: int):
        if len(order) == n:
            yield tuple(order)
            return
        for v in range(n):
            bit = 1 << v
            if not mask & bit and preds[v] & mask == preds[v]:
                order.append(v)
                yield from rec(mask | bit)
                order.pop()

    if not g.is_acyclic():
        raise CyclicGraph("graph contains a cycle")
    yield from rec(0)


def linear_extensions(g: FunctionDag, cap: int = DEFAULT_CAP) -> CandidateSet:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if g.n <= MAX_COUNT_NODES:
        total = count_linear_extensions(g)
        if total > cap:
            raise CapExceeded(cap, total)
    out = []
    for ext in iter_linear_extensions(g):
        if len(out) == cap:
            raise CapExceeded(cap, None)
        out.append(ext)
    return CandidateSet(tuple(out))


# --------------------------------------------------------------------------
# program-level candidates


def program_dag(p: Program) -> FunctionDag:
    """Function DAG with the ``out`` command pinned last.

    Commands whose outputs are never consumed get an ordering constraint
    before the final command so every candidate still ends with ``out``.
    """
    dag = function_dag(p)
    n = dag.n
    if n == 0:
        return dag
    sink = n - 1
    has_out = {a for a, _ in dag.edges}
    extra = {(v, sink) for v in range(n - 1) if v not in has_out}
    return FunctionDag(n, dag.edges | extra)


def permute_program(p: Program, order: Sequence[int]) -> Program:
    """Reorder commands; variable references and names follow the commands."""
    n = len(p.commands)
    if sorted(order) != list(range(n)):
        raise NotAPermutation(f"{list(order)} is not a permutation of 0..{n - 1}")
    pos = {old: new for new, old in enumerate(order)}

    def remap(a):
        return Var(pos[a.index]) if isinstance(a, Var) else a

    commands = []
    for new, old in enumerate(order):
        c = p.commands[old]
        commands.append(replace(c, inputs=tuple(remap(a) for a in c.inputs),
                                params={r: tuple(remap(a) for a in v) for r, v in c.params.items()},
                                output_var=var_name(new, n)))
    return Program(tuple(commands), dict(p.metadata))


def program_candidates(p: Program, cap: int = DEFAULT_CAP) -> CandidateSet:
    report = validate_program(p)
    if not report.ok:
        raise InvalidProgram(report)
    return linear_extensions(program_dag(p), cap)


def candidate_token_sequences(p: Program, table: SymbolTable, cap: int = DEFAULT_CAP) -> list[list[int]]:
    """Token sequences of every valid permutation of ``p`` (original order first)."""
    return [tokenize_program(permute_program(p, order), table)
            for order in program_candidates(p, cap)]

