"""Program intermediate representation.

A :class:`Program` is an ordered list of :class:`Command` objects. Each command
applies one cooking action to literal entities and to the outputs of earlier
commands (:class:`Var` references by 0-based command index). The last command
produces ``out``.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, Union

from .errors import MalformedSequence, UncanonicalizedEntity, VocabularyError


class EntityKind(enum.Enum):
    ACTION = "action"
    INGREDIENT = "ingredient"
    TOOL = "tool"
    QUANTITY = "quantity"
    TEMPERATURE = "temperature"
    TIME = "time"
    HOW = "how"
    WHY = "why"
    OUTPUT = "output"

    @classmethod
    def parse(cls, name: str) -> "EntityKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown entity kind {name!r}") from None


# keyword role -> entity kind; iteration order is the canonical printing order
ROLES: dict[str, EntityKind] = {
    "tool": EntityKind.TOOL,
    "quantity": EntityKind.QUANTITY,
    "time": EntityKind.TIME,
    "temp": EntityKind.TEMPERATURE,
    "how": EntityKind.HOW,
    "why": EntityKind.WHY,
}
ROLE_OF_KIND = {kind: role for role, kind in ROLES.items()}

OUT = "out"
_HVAR = re.compile(r"h([1-9][0-9]*)\Z")


def var_name(index: int, length: int) -> str:
    """Normalized output variable name of command ``index`` in a program of ``length``."""
    return OUT if index == length - 1 else f"h{index + 1}"


def parse_var_name(name: str) -> int | None:
    """Return the 0-based index encoded by ``hN``, or None."""
    m = _HVAR.match(name)
    return int(m.group(1)) - 1 if m else None


@dataclass(frozen=True)
class Entity:
    kind: EntityKind
    value: str
    raw: str | None = field(default=None, compare=False)
    # None: never looked up; False: lookup failed
    canonical: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.kind, EntityKind):
            raise TypeError(f"kind must be an EntityKind, got {self.kind!r}")
        if not self.value:
            raise ValueError("entity value must be non-empty")
        if self.raw is None:
            object.__setattr__(self, "raw", self.value)


@dataclass(frozen=True)
class Lit:
    entity: Entity


@dataclass(frozen=True)
class Var:
    index: int


ArgRef = Union[Lit, Var]


@dataclass(frozen=True)
class Command:
    action: Entity
    inputs: tuple[ArgRef, ...] = ()
    params: Mapping[str, tuple[ArgRef, ...]] = field(default_factory=dict)
    output_var: str = OUT
    # name of the intermediate product (an Output-tagged entity), metadata only
    output_label: Entity | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        unknown = set(self.params) - set(ROLES)
        if unknown:
            raise ValueError(f"unknown role(s): {sorted(unknown)}")
        params = {r: tuple(self.params[r]) for r in ROLES if self.params.get(r)}
        object.__setattr__(self, "params", params)

    def args(self) -> Iterable[tuple[str | None, ArgRef]]:
        """Yield ``(role, arg)`` for every argument; role is None for inputs."""
        for a in self.inputs:
            yield None, a
        for role, values in self.params.items():
            for a in values:
                yield role, a

    def var_refs(self) -> list[int]:
        return [a.index for _, a in self.args() if isinstance(a, Var)]

    def literals(self) -> list[Entity]:
        return [a.entity for _, a in self.args() if isinstance(a, Lit)]


@dataclass(frozen=True)
class Program:
    commands: tuple[Command, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "commands", tuple(self.commands))

    def __len__(self):
        return len(self.commands)

    def entities(self) -> list[Entity]:
        out = []
        for c in self.commands:
            out.append(c.action)
            out.extend(c.literals())
            if c.output_label is not None:
                out.append(c.output_label)
        return out

    def to_dict(self) -> dict:
        def arg(a):
            if isinstance(a, Var):
                return {"var": a.index}
            return {"kind": a.entity.kind.value, "value": a.entity.value}

        return {
            "metadata": dict(self.metadata),
            "commands": [{
                "action": c.action.value,
                "inputs": [arg(a) for a in c.inputs],
                "params": {r: [arg(a) for a in v] for r, v in c.params.items()},
                "output_var": c.output_var,
                "output_label": None if c.output_label is None else c.output_label.value,
            } for c in self.commands],
        }

    def normalized(self) -> "Program":
        """Rename output variables to ``h1 .. h(L-1), out`` by position."""
        n = len(self.commands)
        cmds = tuple(replace(c, output_var=var_name(i, n)) for i, c in enumerate(self.commands))
        return Program(cmds, dict(self.metadata))


# --------------------------------------------------------------------------
# validation


class Violation(enum.Enum):
    USE_BEFORE_DEF = "use-before-def"
    DUPLICATE_VAR = "duplicate-var"
    MISSING_OUT = "missing-out"
    KIND_MISMATCH = "kind-mismatch"


@dataclass(frozen=True)
class Diagnostic:
    command: int | None
    kind: Violation
    message: str

    def __str__(self):
        where = "program" if self.command is None else f"command {self.command}"
        return f"{where}: {self.kind.value}: {self.message}"

    def to_dict(self):
        return {"command": self.command, "kind": self.kind.value, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def __bool__(self):
        return self.ok


def validate_program(p: Program) -> ValidationReport:
    diags: list[Diagnostic] = []
    n = len(p.commands)
    seen: dict[str, int] = {}
    for i, c in enumerate(p.commands):
        if c.action.kind is not EntityKind.ACTION:
            diags.append(Diagnostic(i, Violation.KIND_MISMATCH,
                                    f"action slot holds a {c.action.kind.value} entity"))
        for role, a in c.args():
            if isinstance(a, Var):
                if not 0 <= a.index < i:
                    diags.append(Diagnostic(i, Violation.USE_BEFORE_DEF,
                                            f"reads output of command {a.index} before it is computed"))
                continue
            want = EntityKind.INGREDIENT if role is None else ROLES[role]
            if a.entity.kind is not want:
                slot = "input" if role is None else role
                diags.append(Diagnostic(i, Violation.KIND_MISMATCH,
                                        f"{a.entity.kind.value} {a.entity.value!r} in {slot} slot"))
        if c.output_label is not None and c.output_label.kind is not EntityKind.OUTPUT:
            diags.append(Diagnostic(i, Violation.KIND_MISMATCH,
                                    f"output label is a {c.output_label.kind.value} entity"))
        if c.output_var in seen:
            diags.append(Diagnostic(i, Violation.DUPLICATE_VAR,
                                    f"{c.output_var} already defined by command {seen[c.output_var]}"))
        else:
            seen[c.output_var] = i
    if n == 0:
        diags.append(Diagnostic(None, Violation.MISSING_OUT, "empty program"))
    else:
        outs = [i for i, c in enumerate(p.commands) if c.output_var == OUT]
        if not outs:
            diags.append(Diagnostic(None, Violation.MISSING_OUT, "no command defines out"))
        elif outs[0] != n - 1:
            diags.append(Diagnostic(outs[0], Violation.MISSING_OUT,
                                    "out must be defined by the last command"))
    return ValidationReport(tuple(diags))


# --------------------------------------------------------------------------
# vocabulary


def normalize_term(s: str) -> str:
    return " ".join(s.lower().split())


class Vocabulary:
    """Per-category canonical terms plus a synonym -> canonical map."""

    def __init__(self, canonical: Mapping[EntityKind, Sequence[str]] | None = None,
                 synonyms: Mapping[EntityKind, Mapping[str, str]] | None = None):
        canonical = canonical or {}
        synonyms = synonyms or {}
        self._canonical: dict[EntityKind, tuple[str, ...]] = {}
        self._synonyms: dict[EntityKind, dict[str, str]] = {}
        self._norm: dict[EntityKind, dict[str, str]] = {}
        for kind in EntityKind:
            terms = tuple(canonical.get(kind, ()))
            if len(set(terms)) != len(terms):
                dups = sorted({t for t in terms if terms.count(t) > 1})
                raise VocabularyError(f"duplicate canonical {kind.value} terms: {dups}")
            termset = set(terms)
            syn = dict(synonyms.get(kind, {}))
            for s, target in syn.items():
                if target not in termset:
                    raise VocabularyError(
                        f"{kind.value} synonym {s!r} maps to unknown canonical {target!r}")
            norm = {normalize_term(s): t for s, t in syn.items()}
            norm.update({normalize_term(t): t for t in terms})
            self._canonical[kind] = terms
            self._synonyms[kind] = syn
            self._norm[kind] = norm

    def terms(self, kind: EntityKind) -> tuple[str, ...]:
        return self._canonical[kind]

    def synonyms(self, kind: EntityKind) -> dict[str, str]:
        return dict(self._synonyms[kind])

    def __contains__(self, item: tuple[EntityKind, str]) -> bool:
        kind, value = item
        return value in self._canonical[kind]

    def lookup(self, kind: EntityKind, value: str) -> str | None:
        """Canonical term for ``value``: exact, then case/space-normalized, then synonym."""
        if value in self._canonical[kind]:
            return value
        return self._norm[kind].get(normalize_term(value))

    def counts(self) -> dict[str, int]:
        return {k.value: len(self._canonical[k]) for k in EntityKind}

    def merged(self, other: "Vocabulary") -> "Vocabulary":
        canonical = {k: self.terms(k) + tuple(t for t in other.terms(k) if t not in self.terms(k))
                     for k in EntityKind}
        synonyms = {k: {**self._synonyms[k], **other._synonyms[k]} for k in EntityKind}
        return Vocabulary(canonical, synonyms)

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._canonical == other._canonical and self._synonyms == other._synonyms

    def to_documents(self) -> list[dict]:
        return [{"category": k.value, "canonical": list(self._canonical[k]),
                 "synonyms": dict(self._synonyms[k])}
                for k in EntityKind if self._canonical[k] or self._synonyms[k]]

    @classmethod
    def from_documents(cls, docs: Iterable[Mapping]) -> "Vocabulary":
        canonical: dict[EntityKind, list[str]] = {}
        synonyms: dict[EntityKind, dict[str, str]] = {}
        for doc in docs:
            try:
                kind = EntityKind.parse(doc["category"])
            except (KeyError, ValueError) as e:
                raise VocabularyError(f"bad vocabulary document: {e}") from None
            if kind in canonical:
                raise VocabularyError(f"category {kind.value} defined twice")
            canonical[kind] = list(doc.get("canonical", []))
            synonyms[kind] = dict(doc.get("synonyms", {}))
        return cls(canonical, synonyms)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        """Load a JSON file holding a list of category documents (or ``{"categories": [...]}``)."""
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if isinstance(data, dict):
            data = data.get("categories", [data])
        return cls.from_documents(data)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_documents(), f, indent=2, ensure_ascii=False)
            f.write("\n")


# --------------------------------------------------------------------------
# tokenization

PAD, BOS, EOS, SEP = "<pad>", "<bos>", "<eos>", "<sep>"
SPECIALS = (PAD, BOS, EOS, SEP) + tuple(f"<{r}>" for r in ROLES) + ("<output>",)


class SymbolTable:
    """Deterministic token ids: specials, then terms by category, then variables."""

    def __init__(self, vocab: Vocabulary, max_vars: int = 64):
        self.vocab = vocab
        self.max_vars = max_vars
        symbols: list[tuple] = [("special", s) for s in SPECIALS]
        for kind in EntityKind:
            symbols.extend(("term", kind, t) for t in vocab.terms(kind))
        symbols.extend(("var", f"h{i}") for i in range(1, max_vars + 1))
        symbols.append(("var", OUT))
        self.symbols = symbols
        self.ids = {s: i for i, s in enumerate(symbols)}

    def __len__(self):
        return len(self.symbols)

    def special(self, name: str) -> int:
        return self.ids[("special", name)]

    def term(self, entity: Entity) -> int:
        try:
            return self.ids[("term", entity.kind, entity.value)]
        except KeyError:
            raise UncanonicalizedEntity(entity.kind, entity.value) from None

    def var(self, name: str) -> int:
        try:
            return self.ids[("var", name)]
        except KeyError:
            raise ValueError(f"variable {name!r} is outside the symbol table") from None

    def decode(self, token: int) -> str:
        sym = self.symbols[token]
        return sym[-1]


def tokenize_program(p: Program, table: SymbolTable | Vocabulary) -> list[int]:
    """Serialize ``p`` as ``BOS cmd (SEP cmd)* EOS``.

    Each command is ``action inputs* (<role> value+)* [<output> label] outvar``.
    """
    if isinstance(table, Vocabulary):
        table = SymbolTable(table)
    names = [c.output_var for c in p.commands]
    seq = [table.special(BOS)]
    for i, c in enumerate(p.commands):
        if i:
            seq.append(table.special(SEP))
        seq.append(table.term(c.action))

        def arg_token(a):
            if isinstance(a, Var):
                if not 0 <= a.index < len(names):
                    raise ValueError(f"command {i} references missing command {a.index}")
                return table.var(names[a.index])
            return table.term(a.entity)

        seq.extend(arg_token(a) for a in c.inputs)
        for role, values in c.params.items():
            seq.append(table.special(f"<{role}>"))
            seq.extend(arg_token(a) for a in values)
        if c.output_label is not None:
            seq.append(table.special("<output>"))
            seq.append(table.term(c.output_label))
        seq.append(table.var(c.output_var))
    seq.append(table.special(EOS))
    return seq


def detokenize(tokens: Sequence[int], table: SymbolTable | Vocabulary) -> Program:
    if isinstance(table, Vocabulary):
        table = SymbolTable(table)
    syms = table.symbols
    bos, eos, sep = table.special(BOS), table.special(EOS), table.special(SEP)
    if not tokens or tokens[0] != bos:
        raise MalformedSequence(0, "sequence must start with <bos>")
    for pos, t in enumerate(tokens):
        if not 0 <= t < len(syms):
            raise MalformedSequence(pos, f"token id {t} out of range")
    try:
        end = list(tokens).index(eos)
    except ValueError:
        raise MalformedSequence(len(tokens), "missing <eos>") from None
    if end != len(tokens) - 1:
        raise MalformedSequence(end + 1, "tokens after <eos>")
    if end == 1:
        raise MalformedSequence(1, "no command")

    segments: list[tuple[int, list[int]]] = []
    start = 1
    for pos in range(1, end + 1):
        if tokens[pos] in (sep, eos):
            segments.append((start, list(tokens[start:pos])))
            start = pos + 1

    # output variable names first, so Var references can be resolved
    defined: dict[str, int] = {}
    for i, (off, seg) in enumerate(segments):
        if len(seg) < 2:
            raise MalformedSequence(off + len(seg), "command needs an action and an output variable")
        sym = syms[seg[-1]]
        if sym[0] != "var":
            raise MalformedSequence(off + len(seg) - 1, "command must end with an output variable")
        if sym[1] in defined:
            raise MalformedSequence(off + len(seg) - 1, f"variable {sym[1]} defined twice")
        defined[sym[1]] = i

    commands = []
    for off, seg in segments:
        head = syms[seg[0]]
        if head[0] != "term" or head[1] is not EntityKind.ACTION:
            raise MalformedSequence(off, "command must start with an action term")
        action = Entity(EntityKind.ACTION, head[2])
        inputs: list[ArgRef] = []
        params: dict[str, list[ArgRef]] = {}
        label = None
        current: list[ArgRef] = inputs
        pos = 1
        while pos < len(seg) - 1:
            sym = syms[seg[pos]]
            if sym[0] == "special":
                name = sym[1]
                if name == "<output>":
                    if pos + 3 != len(seg) or syms[seg[pos + 1]][0] != "term":
                        raise MalformedSequence(off + pos, "<output> must be followed by one label term")
                    _, kind, value = syms[seg[pos + 1]]
                    label = Entity(kind, value)
                    pos += 2
                    continue
                role = name[1:-1]
                if role not in ROLES or role in params:
                    raise MalformedSequence(off + pos, f"unexpected {name}")
                current = params.setdefault(role, [])
            elif sym[0] == "var":
                if sym[1] not in defined:
                    raise MalformedSequence(off + pos, f"undefined variable {sym[1]}")
                current.append(Var(defined[sym[1]]))
            else:
                current.append(Lit(Entity(sym[1], sym[2])))
            pos += 1
        for role, values in params.items():
            if not values:
                raise MalformedSequence(off, f"empty <{role}> group")
        commands.append(Command(action, tuple(inputs), {r: tuple(v) for r, v in params.items()},
                                syms[seg[-1]][1], label))
    return Program(tuple(commands))
