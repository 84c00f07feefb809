"""Domain types for documents, ontologies and templates, plus their JSON forms.

All types here are frozen dataclasses; loading validates and rejects bad
input instead of repairing it.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

NULL_SLOT = "ε"

INFORMATIVITY = ("name", "nominal", "pronoun", "unspecified")
SLOT_KINDS = ("entity", "event", "mixed", "boolean", "categorical")
IRREALIS = ("counterfactual", "hypothetical", "future", "unconfirmed",
            "unspecified", "non-occurrence")
FILLER_KINDS = ("mention", "entity", "event", "boolean", "categorical")

# filler kinds accepted by each slot kind
_ACCEPTS = {
    "entity": {"mention", "entity"},
    "event": {"mention", "event"},
    "mixed": {"mention", "entity", "event"},
    "boolean": {"boolean"},
    "categorical": {"categorical"},
}


class TemplexError(Exception):
    """Base class for all input and contract errors raised by this package."""


class MalformedJson(TemplexError):
    pass


class UnknownSlot(TemplexError):
    pass


class UnknownTemplateType(TemplexError):
    pass


class DanglingMention(TemplexError):
    pass


class DanglingDocument(TemplexError):
    pass


class BoundaryError(TemplexError):
    pass


class KindMismatch(TemplexError):
    pass


class OntologyMismatch(TemplexError):
    pass


@dataclass(frozen=True)
class Mention:
    id: str
    left: int
    right: int
    surface: str = ""
    informativity: str = "unspecified"

    @property
    def span(self) -> tuple[int, int]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]
    mentions: tuple[Mention, ...]
    _index: Mapping[str, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.tokens)
        index = {}
        fixed = []
        for i, m in enumerate(self.mentions):
            if not (0 <= m.left <= m.right < n):
                raise BoundaryError(
                    f"document {self.id!r}: mention {m.id!r} has boundaries "
                    f"({m.left}, {m.right}) outside [0, {n})")
            if m.id in index:
                raise MalformedJson(f"document {self.id!r}: duplicate mention id {m.id!r}")
            surface = " ".join(self.tokens[m.left:m.right + 1])
            fixed.append(m if m.surface == surface else replace(m, surface=surface))
            index[m.id] = i
        object.__setattr__(self, "mentions", tuple(fixed))
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "_index", index)

    @property
    def candidate_mentions(self) -> tuple[Mention, ...]:
        return self.mentions

    def mention(self, mention_id: str) -> Mention:
        try:
            return self.mentions[self._index[mention_id]]
        except KeyError:
            raise DanglingMention(
                f"document {self.id!r} has no mention {mention_id!r}") from None

    def mention_position(self, mention_id: str) -> int:
        if mention_id not in self._index:
            raise DanglingMention(f"document {self.id!r} has no mention {mention_id!r}")
        return self._index[mention_id]

    def sort_mentions(self, ids: Iterable[str]) -> tuple[str, ...]:
        """Canonical (left, right, id) order for a set of mention ids."""
        ms = [self.mention(i) for i in set(ids)]
        return tuple(m.id for m in sorted(ms, key=lambda m: (m.left, m.right, m.id)))


@dataclass(frozen=True)
class SlotDef:
    name: str
    kind: str = "entity"
    values: tuple[str, ...] = ()
    requires_time_irrealis: bool = False


@dataclass(frozen=True)
class TemplateType:
    name: str
    slots: tuple[SlotDef, ...]

    def slot(self, name: str) -> SlotDef:
        for s in self.slots:
            if s.name == name:
                return s
        raise UnknownSlot(f"template type {self.name!r} has no slot {name!r}")

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)


@dataclass(frozen=True)
class Ontology:
    template_types: tuple[TemplateType, ...]

    def __post_init__(self):
        if not self.template_types:
            raise MalformedJson("ontology must declare at least one template type")
        seen = set()
        for tt in self.template_types:
            if tt.name in seen:
                raise MalformedJson(f"duplicate template type {tt.name!r}")
            seen.add(tt.name)
            names = [s.name for s in tt.slots]
            if len(set(names)) != len(names):
                raise MalformedJson(f"duplicate slot names in template type {tt.name!r}")
            if NULL_SLOT in names:
                raise MalformedJson(f"reserved slot name {NULL_SLOT!r} used in {tt.name!r}")

    def type(self, name: str) -> TemplateType:
        for tt in self.template_types:
            if tt.name == name:
                return tt
        raise UnknownTemplateType(f"unknown template type {name!r}")

    @property
    def type_names(self) -> tuple[str, ...]:
        return tuple(tt.name for tt in self.template_types)

    @property
    def slot_vocabulary(self) -> tuple[str, ...]:
        """Union of all slot names in declaration order, with the null slot last."""
        out: list[str] = []
        for tt in self.template_types:
            for s in tt.slots:
                if s.name not in out:
                    out.append(s.name)
        return tuple(out) + (NULL_SLOT,)

    def to_json(self) -> dict:
        return {"template_types": [
            {"name": tt.name, "slots": [_slot_to_json(s) for s in tt.slots]}
            for tt in self.template_types]}

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _slot_to_json(s: SlotDef) -> dict:
    d = {"name": s.name, "kind": s.kind, "time_irrealis": s.requires_time_irrealis}
    if s.kind == "categorical":
        d["values"] = list(s.values)
    return d


@dataclass(frozen=True)
class Filler:
    """One slot filler.

    ``mentions`` holds canonically ordered mention ids for mention, entity and
    event fillers; ``value`` holds the payload of boolean and categorical ones.
    """
    kind: str
    mentions: tuple[str, ...] = ()
    value: bool | str | None = None
    time: frozenset[str] = frozenset()
    irrealis: str | None = None

    @classmethod
    def mention(cls, mention_id: str) -> "Filler":
        return cls("mention", (mention_id,))

    def to_json(self) -> dict:
        if self.kind == "mention":
            d: dict = {"mention": self.mentions[0]}
        elif self.kind in ("entity", "event"):
            d = {self.kind: list(self.mentions)}
        else:
            d = {self.kind: self.value}
        if self.time:
            d["time"] = sorted(self.time)
        if self.irrealis is not None:
            d["irrealis"] = self.irrealis
        return d


@dataclass(frozen=True)
class TemplateInstance:
    template_type: str
    fillers: tuple[tuple[str, tuple[Filler, ...]], ...]

    @classmethod
    def build(cls, template_type: str,
              fillers: Mapping[str, Iterable[Filler]]) -> "TemplateInstance":
        """Normalize to the canonical form: empty slots dropped, sorted keys, deduped fillers."""
        items = []
        for slot in sorted(fillers):
            fs = tuple(sorted(set(fillers[slot]), key=_filler_key))
            if fs:
                items.append((slot, fs))
        return cls(template_type, tuple(items))

    @property
    def slots(self) -> dict[str, tuple[Filler, ...]]:
        return dict(self.fillers)

    def to_json(self) -> dict:
        return {"type": self.template_type,
                "fillers": {slot: [f.to_json() for f in fs] for slot, fs in self.fillers}}


def _filler_key(f: Filler):
    return (f.kind, f.mentions, repr(f.value), tuple(sorted(f.time)), f.irrealis or "")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    gold: Mapping[str, tuple[TemplateInstance, ...]]
    ontology: Ontology

    def document(self, doc_id: str) -> Document:
        for d in self.documents:
            if d.id == doc_id:
                return d
        raise DanglingDocument(f"unknown document id {doc_id!r}")

    def to_json(self) -> dict:
        return {
            "documents": [document_to_json(d) for d in self.documents],
            "gold": {d.id: [t.to_json() for t in self.gold.get(d.id, ())]
                     for d in self.documents},
        }

    def subset(self, doc_ids: Iterable[str]) -> "Corpus":
        keep = set(doc_ids)
        docs = tuple(d for d in self.documents if d.id in keep)
        return Corpus(docs, {d.id: self.gold.get(d.id, ()) for d in docs}, self.ontology)


def document_to_json(d: Document) -> dict:
    return {"id": d.id, "tokens": list(d.tokens),
            "mentions": [{"id": m.id, "left": m.left, "right": m.right,
                          "informativity": m.informativity} for m in d.mentions]}


# --------------------------------------------------------------------------
# parsing

def _read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"{path}: {e}") from None


def _require(obj, key, typ, where):
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedJson(f"{where}: missing field {key!r}")
    val = obj[key]
    if not isinstance(val, typ):
        raise MalformedJson(f"{where}: field {key!r} has wrong type {type(val).__name__}")
    return val


def parse_ontology(raw: object) -> Ontology:
    types = []
    for i, tt in enumerate(_require(raw, "template_types", list, "ontology")):
        where = f"template_types[{i}]"
        name = _require(tt, "name", str, where)
        slots = []
        for j, s in enumerate(_require(tt, "slots", list, where)):
            sw = f"{where}.slots[{j}]"
            kind = s.get("kind", "entity") if isinstance(s, dict) else None
            if kind not in SLOT_KINDS:
                raise MalformedJson(f"{sw}: unknown slot kind {kind!r}")
            values = s.get("values", [])
            if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
                raise MalformedJson(f"{sw}: categorical values must be strings")
            flag = s.get("time_irrealis", False)
            if not isinstance(flag, bool):
                raise MalformedJson(f"{sw}: time_irrealis must be boolean")
            slots.append(SlotDef(_require(s, "name", str, sw), kind, tuple(values), flag))
        types.append(TemplateType(name, tuple(slots)))
    return Ontology(tuple(types))


def load_ontology(path) -> Ontology:
    return parse_ontology(_read_json(path))


def parse_document(raw: object, where: str = "document") -> Document:
    doc_id = _require(raw, "id", str, where)
    tokens = _require(raw, "tokens", list, where)
    if not all(isinstance(t, str) for t in tokens):
        raise MalformedJson(f"{where}: tokens must be strings")
    mentions = []
    for j, m in enumerate(raw.get("mentions", [])):
        mw = f"{where}.mentions[{j}]"
        left = _require(m, "left", int, mw)
        right = _require(m, "right", int, mw)
        info = m.get("informativity", "unspecified")
        if info not in INFORMATIVITY:
            raise MalformedJson(f"{mw}: unknown informativity {info!r}")
        mentions.append(Mention(_require(m, "id", str, mw), left, right, "", info))
    return Document(doc_id, tuple(tokens), tuple(mentions))


def parse_filler(raw: object, doc: Document, slot: SlotDef, where: str) -> Filler:
    if not isinstance(raw, dict):
        raise MalformedJson(f"{where}: filler must be an object")
    kinds = [k for k in FILLER_KINDS if k in raw]
    if len(kinds) != 1:
        raise MalformedJson(f"{where}: filler must carry exactly one of {FILLER_KINDS}")
    kind = kinds[0]
    if kind not in _ACCEPTS[slot.kind]:
        raise KindMismatch(f"{where}: slot {slot.name!r} of kind {slot.kind} "
                           f"cannot take a {kind} filler")
    payload = raw[kind]
    mentions: tuple[str, ...] = ()
    value = None
    if kind == "mention":
        if not isinstance(payload, str):
            raise MalformedJson(f"{where}: mention filler must be an id string")
        doc.mention(payload)
        mentions = (payload,)
    elif kind in ("entity", "event"):
        if not isinstance(payload, list) or not payload or not all(isinstance(x, str) for x in payload):
            raise MalformedJson(f"{where}: {kind} filler must be a nonempty list of mention ids")
        mentions = doc.sort_mentions(payload)
    elif kind == "boolean":
        if not isinstance(payload, bool):
            raise MalformedJson(f"{where}: boolean filler must be true/false")
        value = payload
    else:
        if not isinstance(payload, str):
            raise MalformedJson(f"{where}: categorical filler must be a string")
        if slot.values and payload not in slot.values:
            raise KindMismatch(f"{where}: {payload!r} not among {slot.values}")
        value = payload
    time = raw.get("time", [])
    if not isinstance(time, list) or not all(isinstance(t, str) for t in time):
        raise MalformedJson(f"{where}: time must be a list of strings")
    irrealis = raw.get("irrealis")
    if irrealis is not None and irrealis not in IRREALIS:
        raise MalformedJson(f"{where}: unknown irrealis {irrealis!r}")
    return Filler(kind, mentions, value, frozenset(time), irrealis)


def parse_template(raw: object, doc: Document, ontology: Ontology, where: str) -> TemplateInstance:
    ttype = ontology.type(_require(raw, "type", str, where))
    fillers_raw = raw.get("fillers", {})
    if not isinstance(fillers_raw, dict):
        raise MalformedJson(f"{where}: fillers must be an object")
    fillers = {}
    for slot_name, items in fillers_raw.items():
        slot = ttype.slot(slot_name)
        if not isinstance(items, list):
            raise MalformedJson(f"{where}.{slot_name}: filler list expected")
        fillers[slot_name] = [parse_filler(f, doc, slot, f"{where}.{slot_name}[{k}]")
                              for k, f in enumerate(items)]
    return TemplateInstance.build(ttype.name, fillers)


def parse_corpus(raw: object, ontology: Ontology) -> Corpus:
    docs = [parse_document(d, f"documents[{i}]")
            for i, d in enumerate(_require(raw, "documents", list, "corpus"))]
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise MalformedJson("duplicate document ids")
    by_id = {d.id: d for d in docs}
    gold_raw = raw.get("gold", {})
    if not isinstance(gold_raw, dict):
        raise MalformedJson("corpus: gold must be an object keyed by document id")
    gold = {}
    for doc_id, temps in gold_raw.items():
        if doc_id not in by_id:
            raise DanglingDocument(f"gold references unknown document {doc_id!r}")
        if not isinstance(temps, list):
            raise MalformedJson(f"gold[{doc_id!r}] must be a list")
        gold[doc_id] = tuple(parse_template(t, by_id[doc_id], ontology, f"gold[{doc_id!r}][{k}]")
                             for k, t in enumerate(temps))
    for d in docs:
        gold.setdefault(d.id, ())
    return Corpus(tuple(docs), gold, ontology)


def load_corpus(path, ontology_path) -> Corpus:
    """Load and validate a corpus file against an ontology file."""
    ontology = load_ontology(ontology_path)
    return parse_corpus(_read_json(path), ontology)


# --------------------------------------------------------------------------
# predictions

def predictions_to_json(predictions: Mapping[str, Iterable[TemplateInstance]]) -> dict:
    out = {}
    for doc_id in sorted(predictions):
        temps = sorted(set(predictions[doc_id]), key=_template_key)
        out[doc_id] = [t.to_json() for t in temps]
    return {"predictions": out}


def _template_key(t: TemplateInstance):
    return json.dumps(t.to_json(), sort_keys=True, ensure_ascii=False)


def save_predictions(predictions: Mapping[str, Iterable[TemplateInstance]], path,
                     corpus: Corpus | None = None) -> None:
    """Write predictions as JSON; set-valued, so duplicates collapse.

    When ``corpus`` is given, every document id and mention reference is
    checked against it first.
    """
    if corpus is not None:
        known = {d.id for d in corpus.documents}
        for doc_id, temps in predictions.items():
            if doc_id not in known:
                raise DanglingDocument(f"prediction for unknown document {doc_id!r}")
            doc = corpus.document(doc_id)
            for t in temps:
                tt = corpus.ontology.type(t.template_type)
                for slot, fs in t.fillers:
                    tt.slot(slot)
                    for f in fs:
                        for m in f.mentions:
                            doc.mention(m)
    blob = json.dumps(predictions_to_json(predictions), indent=1, ensure_ascii=False,
                      sort_keys=True)
    Path(path).write_text(blob + "\n", encoding="utf-8")


def parse_predictions(raw: object, corpus: Corpus) -> dict[str, frozenset[TemplateInstance]]:
    preds = _require(raw, "predictions", dict, "predictions file")
    out = {}
    for doc_id, temps in preds.items():
        doc = corpus.document(doc_id)
        if not isinstance(temps, list):
            raise MalformedJson(f"predictions[{doc_id!r}] must be a list")
        out[doc_id] = frozenset(parse_template(t, doc, corpus.ontology, f"predictions[{doc_id!r}][{k}]")
                                for k, t in enumerate(temps))
    return out


def load_predictions(path, corpus: Corpus) -> dict[str, frozenset[TemplateInstance]]:
    return parse_predictions(_read_json(path), corpus)


def save_corpus(corpus: Corpus, path, ontology_path=None) -> None:
    Path(path).write_text(json.dumps(corpus.to_json(), indent=1, ensure_ascii=False) + "\n",
                          encoding="utf-8")
    if ontology_path is not None:
        save_ontology(corpus.ontology, ontology_path)


def save_ontology(ontology: Ontology, path) -> None:
    Path(path).write_text(json.dumps(ontology.to_json(), indent=1, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def default_ontology_path() -> str | None:
    return os.environ.get("TEMPLEX_ONTOLOGY")
