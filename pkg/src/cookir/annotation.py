"""From word-tagged recipe sentences to programs.

The input is a :class:`TaggedRecipe`: sentences whose words carry one of the
nine entity tags (or none), plus producer -> consumer connections between
action occurrences. The deterministic stages are

1. :func:`split_sentences`: one action occurrence per sentence,
2. :func:`merge_entities`: adjacent same-tag words become one entity,
3. :func:`canonicalize`: map surface forms onto the vocabulary,
4. :func:`assemble_program`: one command per sentence, connections become
   variable references.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, NamedTuple

from .errors import (AmbiguousConnection, AnnotationError, CyclicConnections, ForwardConnection)
from .ir import (ROLE_OF_KIND, Command, Entity, EntityKind, Lit, Program, Var, Vocabulary,
                 var_name)

log = logging.getLogger(__name__)

# untagged words allowed inside a same-tag run; commas and "and" always break a run
CONNECTORS = frozenset({"of", "the", "a", "an", "-"})
_TRAILING_PUNCT = ",;.:!?"


@dataclass(frozen=True)
class TaggedWord:
    surface: str
    tag: EntityKind | None = None

    def __post_init__(self):
        if not self.surface:
            raise ValueError("tagged word surface must be non-empty")


@dataclass(frozen=True)
class TaggedSentence:
    id: str
    words: tuple[TaggedWord, ...]

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "words", tuple(self.words))

    @property
    def text(self) -> str:
        return " ".join(w.surface for w in self.words)


@dataclass(frozen=True)
class Occurrence:
    """An action occurrence: the ``action``-th action of sentence ``sentence``.

    ``action=None`` names the sentence as a whole, which is only meaningful
    when the sentence holds exactly one action.
    """
    sentence: str
    action: int | None = None

    def __str__(self):
        return self.sentence if self.action is None else f"{self.sentence}#{self.action}"


@dataclass(frozen=True)
class TaggedRecipe:
    recipe_id: str
    title: str
    sentences: tuple[TaggedSentence, ...]
    connections: tuple[tuple[Occurrence, Occurrence], ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "connections", tuple(self.connections))
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise AnnotationError("sentence ids must be unique within a recipe")

    def sentence(self, sid: str) -> TaggedSentence:
        for s in self.sentences:
            if s.id == sid:
                return s
        raise KeyError(sid)

    # -- serialization ----------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TaggedRecipe":
        try:
            sentences = []
            for s in d["sentences"]:
                words = []
                for w in s["words"]:
                    tag = w.get("tag")
                    words.append(TaggedWord(w["w"], None if tag in (None, "") else EntityKind.parse(tag)))
                sentences.append(TaggedSentence(str(s["id"]), tuple(words)))
            conns = tuple((_endpoint(a), _endpoint(b)) for a, b in d.get("connections", []))
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"bad tagged recipe: {e}") from None
        recipe = cls(str(d.get("recipe_id", "")), d.get("title", ""), tuple(sentences), conns)
        _check_endpoints(recipe)
        return recipe

    @classmethod
    def load(cls, path) -> "TaggedRecipe":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        def ep(o: Occurrence):
            return o.sentence if o.action is None else [o.sentence, o.action]

        return {
            "recipe_id": self.recipe_id,
            "title": self.title,
            "sentences": [{"id": s.id, "words": [{"w": w.surface, "tag": None if w.tag is None else w.tag.value}
                                                 for w in s.words]}
                          for s in self.sentences],
            "connections": [[ep(a), ep(b)] for a, b in self.connections],
        }


def _endpoint(x) -> Occurrence:
    if isinstance(x, Mapping):
        return Occurrence(str(x["sentence"]), x.get("action"))
    if isinstance(x, (list, tuple)):
        sid, k = x
        return Occurrence(str(sid), int(k))
    return Occurrence(str(x))


def _check_endpoints(r: TaggedRecipe) -> None:
    counts = {s.id: len(action_occurrences(s)) for s in r.sentences}
    for a, b in r.connections:
        for o in (a, b):
            if o.sentence not in counts:
                raise AnnotationError(f"connection endpoint {o} names an unknown sentence")
            k = counts[o.sentence]
            if k == 0:
                raise AnnotationError(f"connection endpoint {o} names a sentence without an action")
            if o.action is not None and not 0 <= o.action < k:
                raise AnnotationError(f"connection endpoint {o}: sentence has {k} action(s)")


# --------------------------------------------------------------------------
# merging


class MergedEntity(NamedTuple):
    kind: EntityKind
    surface: str
    indices: tuple[int, ...]  # positions of the tagged words forming the entity


def _strip(surface: str) -> str:
    return surface.rstrip(_TRAILING_PUNCT) or surface


def _join(words: list[str]) -> str:
    out = ""
    for w in words:
        if w == "-" or out.endswith("-"):
            out += w
        elif out:
            out += " " + w
        else:
            out = w
    return out


def _runs(s: TaggedSentence) -> list[tuple[EntityKind, list[int], list[int]]]:
    """Maximal same-tag runs as (kind, tagged indices, all indices incl. bridges)."""
    runs = []
    kind: EntityKind | None = None
    tagged: list[int] = []
    span: list[int] = []
    pending: list[int] = []
    closed = False

    def flush():
        nonlocal kind, tagged, span, pending, closed
        if kind is not None:
            runs.append((kind, tagged, span))
        kind, tagged, span, pending, closed = None, [], [], [], False

    for i, w in enumerate(s.words):
        if w.tag is None:
            if kind is not None and not closed and w.surface.lower() in CONNECTORS:
                pending.append(i)
            else:
                flush()
            continue
        if kind is w.tag and not closed:
            span.extend(pending)
        else:
            flush()
            kind = w.tag
        pending = []
        tagged.append(i)
        span.append(i)
        if w.surface[-1] in ",;":
            closed = True
    flush()
    return runs


def merge_entities(s: TaggedSentence) -> list[MergedEntity]:
    """Group tagged words into entities.

    >>> words = "mix fresh oregano , salt and black pepper".split()
    >>> tags = ["action"] + ["ingredient"] * 2 + [None, "ingredient", None] + ["ingredient"] * 2
    >>> s = TaggedSentence("1", [TaggedWord(w, t and EntityKind(t)) for w, t in zip(words, tags)])
    >>> [e.surface for e in merge_entities(s) if e.kind is EntityKind.INGREDIENT]
    ['fresh oregano', 'salt', 'black pepper']
    """
    out = []
    for kind, tagged, span in _runs(s):
        parts = [_strip(s.words[i].surface) for i in span]
        out.append(MergedEntity(kind, _join([p for p in parts if p]), tuple(tagged)))
    return out


def action_occurrences(s: TaggedSentence) -> list[MergedEntity]:
    return [e for e in merge_entities(s) if e.kind is EntityKind.ACTION]


# --------------------------------------------------------------------------
# splitting


def split_sentences(r: TaggedRecipe) -> TaggedRecipe:
    """Split multi-action sentences so each sentence holds exactly one action.

    Split points fall right before the first word of every action occurrence
    after the first. Sentences without any action are dropped with a warning.
    """
    warnings = list(r.warnings)
    sentences: list[TaggedSentence] = []
    remap: dict[tuple[str, int], str] = {}
    n_actions: dict[str, int] = {}
    for s in r.sentences:
        occ = action_occurrences(s)
        n_actions[s.id] = len(occ)
        if not occ:
            msg = f"sentence {s.id} has no action and was dropped: {s.text!r}"
            log.warning(msg)
            warnings.append(msg)
            continue
        if len(occ) == 1:
            sentences.append(s)
            remap[(s.id, 0)] = s.id
            continue
        cuts = [0] + [e.indices[0] for e in occ[1:]] + [len(s.words)]
        for k in range(len(occ)):
            new_id = f"{s.id}.{k + 1}"
            sentences.append(TaggedSentence(new_id, s.words[cuts[k]:cuts[k + 1]]))
            remap[(s.id, k)] = new_id

    def move(o: Occurrence) -> Occurrence:
        if o.action is None:
            if n_actions.get(o.sentence) != 1:
                raise AmbiguousConnection(
                    f"connection endpoint {o} names a sentence with {n_actions.get(o.sentence, 0)} "
                    "actions; give the action occurrence explicitly")
            return Occurrence(remap[(o.sentence, 0)], 0)
        return Occurrence(remap[(o.sentence, o.action)], 0)

    conns = tuple((move(a), move(b)) for a, b in r.connections)
    return TaggedRecipe(r.recipe_id, r.title, tuple(sentences), conns, tuple(warnings))


# --------------------------------------------------------------------------
# canonicalization and assembly


def canonicalize(e: Entity, v: Vocabulary) -> Entity:
    hit = v.lookup(e.kind, e.value)
    if hit is None:
        return replace(e, canonical=False)
    return Entity(e.kind, hit, raw=e.raw, canonical=True)


def canonicalize_program(p: Program, v: Vocabulary) -> Program:
    def arg(a):
        return Lit(canonicalize(a.entity, v)) if isinstance(a, Lit) else a

    cmds = []
    for c in p.commands:
        cmds.append(replace(
            c, action=canonicalize(c.action, v),
            inputs=tuple(arg(a) for a in c.inputs),
            params={r: tuple(arg(a) for a in vals) for r, vals in c.params.items()},
            output_label=None if c.output_label is None else canonicalize(c.output_label, v)))
    return Program(tuple(cmds), dict(p.metadata))


def uncanonicalized(p: Program) -> list[Entity]:
    return [e for e in p.entities() if e.canonical is False]


def _sentence_edges(r: TaggedRecipe) -> list[tuple[int, int]]:
    index = {s.id: i for i, s in enumerate(r.sentences)}
    edges = []
    for a, b in r.connections:
        for o in (a, b):
            if o.sentence not in index:
                raise AnnotationError(f"connection endpoint {o} names an unknown sentence")
            if o.action not in (None, 0):
                raise AnnotationError(f"connection endpoint {o}: recipe is not split")
        edges.append((index[a.sentence], index[b.sentence]))
    return edges


def _find_cycle(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    succ: list[set[int]] = [set() for _ in range(n)]
    indeg = [0] * n
    for a, b in set(edges):
        if a == b:
            return True
        succ[a].add(b)
        indeg[b] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen != n


def assemble_program(r: TaggedRecipe, v: Vocabulary | None = None) -> Program:
    """Build the program of an already split recipe (one action per sentence)."""
    v = v or Vocabulary()
    merged = []
    for s in r.sentences:
        ents = merge_entities(s)
        n_act = sum(e.kind is EntityKind.ACTION for e in ents)
        if n_act != 1:
            raise AnnotationError(f"sentence {s.id} has {n_act} actions; run split_sentences first")
        merged.append(ents)

    edges = _sentence_edges(r)
    if _find_cycle(len(r.sentences), edges):
        raise CyclicConnections("connections contain a cycle")
    for a, b in edges:
        if a > b:
            raise ForwardConnection(
                f"sentence {r.sentences[a].id} feeds earlier sentence {r.sentences[b].id}")

    producers: list[list[int]] = [[] for _ in r.sentences]
    for a, b in sorted(set(edges)):
        producers[b].append(a)

    n = len(r.sentences)
    commands = []
    for i, ents in enumerate(merged):
        action = None
        inputs: list = [Var(j) for j in producers[i]]
        params: dict[str, list] = {}
        label = None
        for e in ents:
            ent = canonicalize(Entity(e.kind, e.surface), v)
            if e.kind is EntityKind.ACTION:
                action = ent
            elif e.kind is EntityKind.OUTPUT:
                if label is None:
                    label = ent
            elif e.kind is EntityKind.INGREDIENT:
                if Lit(ent) not in inputs:
                    inputs.append(Lit(ent))
            else:
                slot = params.setdefault(ROLE_OF_KIND[e.kind], [])
                if Lit(ent) not in slot:
                    slot.append(Lit(ent))
        commands.append(Command(action, tuple(inputs), {k: tuple(x) for k, x in params.items()},
                                var_name(i, n), label))
    meta = {"recipe_id": r.recipe_id, "title": r.title}
    return Program(tuple(commands), meta)


def build_program(r: TaggedRecipe, v: Vocabulary | None = None) -> Program:
    """Split then assemble."""
    return assemble_program(split_sentences(r), v)


def diff_tags(a: TaggedRecipe, b: TaggedRecipe) -> list[tuple[str, int, str, str | None, str | None]]:
    """Word-level tag disagreements between two annotations of the same recipe."""
    out = []
    other = {s.id: s for s in b.sentences}
    for s in a.sentences:
        t = other.get(s.id)
        if t is None:
            continue
        for i, (w1, w2) in enumerate(zip(s.words, t.words)):
            if w1.tag is not w2.tag:
                out.append((s.id, i, w1.surface,
                            None if w1.tag is None else w1.tag.value,
                            None if w2.tag is None else w2.tag.value))
    return out
