"""Entity-similarity functions and the CEAF-family template scores."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..core import Document, Filler, Ontology, OntologyMismatch, TemplateInstance
from .align import align_optimal

PHIS = ("phi3", "phi4", "phi_subset")
VARIANTS = ("rme_relaxed", "ree_def", "ree_impl")
TYPE_SLOT = "type"


def phi3(ref: frozenset, pred: frozenset) -> float:
    return float(len(ref & pred))


def phi4(ref: frozenset, pred: frozenset) -> float:
    if not ref and not pred:
        return 0.0
    return 2.0 * len(ref & pred) / (len(ref) + len(pred))


def phi_subset(ref: frozenset, pred: frozenset) -> float:
    return 1.0 if pred and pred <= ref else 0.0


SIMILARITY = {"phi3": phi3, "phi4": phi4, "phi_subset": phi_subset}


def similarity_fn(name: str):
    key = name.replace("-", "_").lower()
    if key in ("phisubset", "phi_sub", "subset"):
        key = "phi_subset"
    if key not in SIMILARITY:
        raise ValueError(f"unknown similarity {name!r}; expected one of {PHIS}")
    return SIMILARITY[key]


def normalize_variant(name: str) -> str:
    key = name.replace("-", "_").lower()
    if key in ("rme", "rme_relaxed"):
        return "rme_relaxed"
    if key not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; expected one of {VARIANTS}")
    return key


def filler_items(f: Filler, doc: Document | None) -> frozenset:
    """The comparable contents of a filler: mention boundaries or a typed value."""
    if f.kind in ("boolean", "categorical"):
        return frozenset([("v", f.kind, f.value)])
    if doc is None:
        return frozenset(("m", mid) for mid in f.mentions)
    return frozenset(("m",) + doc.mention(mid).span for mid in f.mentions)


def check_templates(templates: Iterable[TemplateInstance], ontology: Ontology | None) -> None:
    if ontology is None:
        return
    for t in templates:
        if t.template_type not in ontology.type_names:
            raise OntologyMismatch(f"template type {t.template_type!r} is not in the ontology")
        names = ontology.type(t.template_type).slot_names
        for slot, _ in t.fillers:
            if slot not in names:
                raise OntologyMismatch(f"slot {slot!r} is not declared for {t.template_type!r}")


@dataclass
class Tally:
    """Pooled numerators and denominators for one slot."""
    p_num: float = 0.0
    p_den: float = 0.0
    r_num: float = 0.0
    r_den: float = 0.0
    n_ref: int = 0
    n_pred: int = 0

    def add(self, other: "Tally") -> None:
        self.p_num += other.p_num
        self.p_den += other.p_den
        self.r_num += other.r_num
        self.r_den += other.r_den
        self.n_ref += other.n_ref
        self.n_pred += other.n_pred


def prf(p_num, p_den, r_num, r_den):
    """(p, r, f1, flags) with the zero-denominator convention."""
    flags = []
    if p_den > 0:
        p = p_num / p_den
    else:
        p = 0.0
        flags.append("empty_pred")
    if r_den > 0:
        r = r_num / r_den
    else:
        r = 0.0
        flags.append("empty_ref")
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f, flags


def slot_entities(t: TemplateInstance | None, slot: str, doc: Document | None) -> list[frozenset]:
    if t is None:
        return []
    if slot == TYPE_SLOT:
        return [frozenset([("t", t.template_type)])]
    return [filler_items(f, doc) for f in t.slots.get(slot, ())]


def slot_tally(refs: Sequence[frozenset], preds: Sequence[frozenset], phi, variant: str) -> Tally:
    """Score one slot of one aligned pair (either side may be empty)."""
    tally = Tally(p_den=sum(phi(s, s) for s in preds), r_den=sum(phi(r, r) for r in refs),
                  n_ref=len(refs), n_pred=len(preds))
    if not refs or not preds:
        return tally
    if variant == "ree_def":
        w = [[phi(r, s) for s in preds] for r in refs]
        _, total = align_optimal(w)
        tally.p_num = tally.r_num = total
        return tally
    # relaxed: each prediction goes to its best reference; references may be reused
    merged: dict[int, frozenset] = {}
    for s in preds:
        scores = [phi(r, s) for r in refs]
        best = max(scores)
        if best <= 0:
            continue
        i = scores.index(best)
        tally.p_num += best
        merged[i] = merged.get(i, frozenset()) | s
    tally.r_num = sum(phi(refs[i], s) for i, s in merged.items())
    return tally


def _slots_for(t: TemplateInstance | None, ontology: Ontology | None) -> list[str]:
    if t is None:
        return []
    if ontology is not None:
        return list(ontology.type(t.template_type).slot_names)
    return [s for s, _ in t.fillers]


def pair_tallies(ref: TemplateInstance | None, pred: TemplateInstance | None, phi,
                 variant: str, doc: Document | None,
                 ontology: Ontology | None) -> dict[tuple[str, str], Tally]:
    """Per-(type, slot) tallies for an aligned pair, or a lone template (other side None)."""
    out: dict[tuple[str, str], Tally] = {}
    if ref is not None and pred is not None and ref.template_type != pred.template_type:
        out.update(pair_tallies(ref, None, phi, variant, doc, ontology))
        for k, v in pair_tallies(None, pred, phi, variant, doc, ontology).items():
            out.setdefault(k, Tally()).add(v)
        return out
    base = ref if ref is not None else pred
    slots = list(dict.fromkeys(_slots_for(ref, ontology) + _slots_for(pred, ontology)))
    if variant == "ree_impl":
        slots.append(TYPE_SLOT)
    for slot in slots:
        key = ("", TYPE_SLOT) if slot == TYPE_SLOT else (base.template_type, slot)
        out[key] = slot_tally(slot_entities(ref, slot, doc), slot_entities(pred, slot, doc),
                              phi, variant)
    return out


def template_similarity(ref: TemplateInstance, pred: TemplateInstance, phi, variant: str,
                        doc: Document | None, ontology: Ontology | None) -> float:
    if ref.template_type != pred.template_type:
        return 0.0
    return sum(t.p_num for t in pair_tallies(ref, pred, phi, variant, doc, ontology).values())


@dataclass
class ScoreReport:
    variant: str
    phi: str
    slots: dict[str, Tally] = field(default_factory=dict)
    types: dict[str, Tally] = field(default_factory=dict)
    alignment: list = field(default_factory=list)

    def slot_rows(self) -> list[dict]:
        rows = []
        for name, t in self.slots.items():
            p, r, f, flags = prf(t.p_num, t.p_den, t.r_num, t.r_den)
            row = {"slot": name, "p": p, "r": r, "f1": f, "n_ref": t.n_ref, "n_pred": t.n_pred}
            if name == TYPE_SLOT:
                row["legacy"] = True
            if flags:
                row["flags"] = flags
            rows.append(row)
        return rows

    def _micro(self) -> Tally:
        total = Tally()
        for t in self.slots.values():
            total.add(t)
        return total

    @property
    def micro(self) -> tuple[float, float, float]:
        t = self._micro()
        return prf(t.p_num, t.p_den, t.r_num, t.r_den)[:3]

    @property
    def macro(self) -> tuple[float, float, float]:
        live = [prf(t.p_num, t.p_den, t.r_num, t.r_den) for t in self.slots.values()
                if t.n_ref + t.n_pred > 0]
        if not live:
            return 0.0, 0.0, 0.0
        n = len(live)
        return (sum(x[0] for x in live) / n, sum(x[1] for x in live) / n,
                sum(x[2] for x in live) / n)

    @property
    def precision(self) -> float:
        return self.micro[0]

    @property
    def recall(self) -> float:
        return self.micro[1]

    @property
    def f1(self) -> float:
        return self.micro[2]

    @property
    def flags(self) -> list[str]:
        t = self._micro()
        return prf(t.p_num, t.p_den, t.r_num, t.r_den)[3]

    def merge(self, other: "ScoreReport") -> None:
        for name, t in other.slots.items():
            self.slots.setdefault(name, Tally()).add(t)
        for name, t in other.types.items():
            self.types.setdefault(name, Tally()).add(t)
        self.alignment.extend(other.alignment)

    def to_json(self) -> dict:
        mp, mr, mf = self.micro
        ap, ar, af = self.macro
        types = []
        for name, t in self.types.items():
            p, r, f, _ = prf(t.p_num, t.p_den, t.r_num, t.r_den)
            types.append({"type": name, "p": p, "r": r, "f1": f})
        out = {
            "variant": self.variant,
            "phi": self.phi,
            "slots": self.slot_rows(),
            "types": types,
            "micro": {"p": mp, "r": mr, "f1": mf},
            "macro": {"p": ap, "r": ar, "f1": af},
            "alignment": [list(a) for a in self.alignment],
        }
        if self.flags:
            out["flags"] = self.flags
        if self.variant == "ree_impl":
            out["note"] = "legacy variant: the template type is scored as an extra slot"
        return out


def _slot_label(key: tuple[str, str]) -> str:
    return key[1] if key[0] == "" else f"{key[0]}.{key[1]}"


def entity_score(reference: Iterable[TemplateInstance], predicted: Iterable[TemplateInstance],
                 phi: str = "phi3", variant: str = "rme_relaxed", doc: Document | None = None,
                 ontology: Ontology | None = None, doc_id: str | None = None) -> ScoreReport:
    """CEAF-style score of one document's predicted templates against its references.

    Templates are aligned one-to-one by Kuhn-Munkres on the variant's own
    pairwise similarity (zero across types); slots are then scored within
    each aligned pair, and unaligned templates add only denominator mass.
    With ``doc`` mentions are compared by token boundaries, else by id.
    """
    variant = normalize_variant(variant)
    fn = similarity_fn(phi)
    refs = _canonical(reference)
    preds = _canonical(predicted)
    check_templates(refs, ontology)
    check_templates(preds, ontology)
    w = [[template_similarity(r, s, fn, variant, doc, ontology) for s in preds] for r in refs]
    pairs, _ = align_optimal(w) if refs and preds else ([], 0.0)
    pairs = [(i, j) for i, j in pairs if refs[i].template_type == preds[j].template_type]
    report = ScoreReport(variant, fn.__name__)
    if ontology is not None:
        for tt in ontology.template_types:
            report.types.setdefault(tt.name, Tally())
            for s in tt.slot_names:
                report.slots.setdefault(f"{tt.name}.{s}", Tally())
        if variant == "ree_impl":
            report.slots.setdefault(TYPE_SLOT, Tally())
    aligned_r = {i for i, _ in pairs}
    aligned_p = {j for _, j in pairs}
    units = [(refs[i], preds[j]) for i, j in pairs]
    units += [(r, None) for i, r in enumerate(refs) if i not in aligned_r]
    units += [(None, s) for j, s in enumerate(preds) if j not in aligned_p]
    for ref, pred in units:
        for key, tally in pair_tallies(ref, pred, fn, variant, doc, ontology).items():
            report.slots.setdefault(_slot_label(key), Tally()).add(tally)
            if key[0]:
                report.types.setdefault(key[0], Tally()).add(tally)
    report.alignment = [((doc_id, i, j) if doc_id is not None else (i, j)) for i, j in pairs]
    return report


def _canonical(templates: Iterable[TemplateInstance]) -> list[TemplateInstance]:
    """Lists keep their order; sets are put in a stable order so ties resolve reproducibly."""
    if isinstance(templates, (set, frozenset)):
        return sorted(templates, key=lambda t: (t.template_type, repr(t.fillers)))
    return list(templates)

