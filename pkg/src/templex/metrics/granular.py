"""Granular combined score: template-type F1 times slot-filler F1 with partial credit.

All arithmetic is carried in :class:`fractions.Fraction`; every credit is a
dyadic rational, so the combined score is the exact product of its factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..core import Document, Filler, Ontology, SlotDef, TemplateInstance
from .align import align_optimal
from .ceaf import _canonical, check_templates

ONE = Fraction(1)
HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)
ZERO = Fraction(0)


def _spans(f: Filler, doc: Document | None) -> dict:
    """Mention identity (token boundaries when a document is given) -> informativity."""
    out = {}
    for mid in f.mentions:
        if doc is None:
            out[("m", mid)] = "unspecified"
        else:
            m = doc.mention(mid)
            out[("m",) + m.span] = m.informativity
    return out


def ladder_credit(tier: str, reference_tiers: set[str]) -> Fraction:
    """Credit for a correct mention of the given informativity tier.

    Names always earn full credit. A nominal earns half when the reference
    entity also has a name. A pronoun is halved once for each more
    informative tier (name, nominal) present in the reference.
    """
    if tier == "nominal":
        return HALF if "name" in reference_tiers else ONE
    if tier == "pronoun":
        drops = len({"name", "nominal"} & reference_tiers)
        return Fraction(1, 2 ** drops)
    return ONE


def base_credit(ref: Filler, pred: Filler, slot: SlotDef | None, doc: Document | None) -> Fraction:
    if ref.kind in ("boolean", "categorical") or pred.kind in ("boolean", "categorical"):
        return ONE if (ref.kind, ref.value) == (pred.kind, pred.value) else ZERO
    ref_spans = _spans(ref, doc)
    pred_spans = _spans(pred, doc)
    if not pred_spans or not set(pred_spans) <= set(ref_spans):
        return ZERO
    as_event = ref.kind == "event" or (slot is not None and slot.kind == "event")
    if as_event:
        return ONE
    tiers = set(ref_spans.values())
    return max(ladder_credit(ref_spans[k], tiers) for k in pred_spans)


@dataclass(frozen=True)
class Credit:
    ref_template: int
    pred_template: int
    slot: str
    ref_filler: int
    pred_filler: int
    base: Fraction
    time_match: bool | None
    irrealis_match: bool | None
    credit: Fraction

    def to_json(self) -> dict:
        out = {"ref_template": self.ref_template, "pred_template": self.pred_template,
               "slot": self.slot, "ref_filler": self.ref_filler,
               "pred_filler": self.pred_filler, "base": str(self.base),
               "credit": str(self.credit)}
        if self.time_match is not None:
            out["time_match"] = self.time_match
            out["irrealis_match"] = self.irrealis_match
        return out


def filler_credit(ref: Filler, pred: Filler, slot: SlotDef | None,
                  doc: Document | None) -> tuple[Fraction, Fraction, bool | None, bool | None]:
    """(credit, base, time_match, irrealis_match) for one reference/predicted filler pair."""
    base = base_credit(ref, pred, slot, doc)
    if slot is None or not slot.requires_time_irrealis:
        return base, base, None, None
    time_ok = ref.time == pred.time
    irr_ok = ref.irrealis == pred.irrealis
    if base == 0:
        return ZERO, base, time_ok, irr_ok
    credit = HALF * base + (QUARTER if time_ok else ZERO) + (QUARTER if irr_ok else ZERO)
    return credit, base, time_ok, irr_ok


def _slot_def(ontology: Ontology | None, type_name: str, slot: str) -> SlotDef | None:
    if ontology is None:
        return None
    return ontology.type(type_name).slot(slot)


def pair_credits(ref: TemplateInstance, pred: TemplateInstance, ri: int, pj: int,
                 doc: Document | None, ontology: Ontology | None) -> list[Credit]:
    """Per-slot one-to-one filler matching inside an aligned same-type pair."""
    out = []
    rs, ps = ref.slots, pred.slots
    for slot in sorted(set(rs) & set(ps)):
        sd = _slot_def(ontology, ref.template_type, slot)
        table = [[filler_credit(r, p, sd, doc) for p in ps[slot]] for r in rs[slot]]
        w = [[float(c[0]) for c in row] for row in table]
        pairs, _ = align_optimal(w)
        for a, b in pairs:
            credit, base, t_ok, i_ok = table[a][b]
            if credit > 0:
                out.append(Credit(ri, pj, slot, a, b, base, t_ok, i_ok, credit))
    return out


def _n_fillers(t: TemplateInstance) -> int:
    return sum(len(fs) for _, fs in t.fillers)


@dataclass
class GranularReport:
    matched_types: int = 0
    n_ref_templates: int = 0
    n_pred_templates: int = 0
    credit: Fraction = ZERO
    n_ref_fillers: int = 0
    n_pred_fillers: int = 0
    ledger: list = field(default_factory=list)
    alignment: list = field(default_factory=list)

    @staticmethod
    def _f1(num, n_pred, n_ref) -> Fraction:
        p = Fraction(num) / n_pred if n_pred else ZERO
        r = Fraction(num) / n_ref if n_ref else ZERO
        return 2 * p * r / (p + r) if p + r > 0 else ZERO

    @property
    def type_f1(self) -> Fraction:
        return self._f1(self.matched_types, self.n_pred_templates, self.n_ref_templates)

    @property
    def slot_f1(self) -> Fraction:
        return self._f1(self.credit, self.n_pred_fillers, self.n_ref_fillers)

    @property
    def combined_score(self) -> Fraction:
        return self.type_f1 * self.slot_f1

    @property
    def slot_precision(self) -> Fraction:
        return self.credit / self.n_pred_fillers if self.n_pred_fillers else ZERO

    @property
    def slot_recall(self) -> Fraction:
        return self.credit / self.n_ref_fillers if self.n_ref_fillers else ZERO

    def merge(self, other: "GranularReport") -> None:
        self.matched_types += other.matched_types
        self.n_ref_templates += other.n_ref_templates
        self.n_pred_templates += other.n_pred_templates
        self.credit += other.credit
        self.n_ref_fillers += other.n_ref_fillers
        self.n_pred_fillers += other.n_pred_fillers
        self.ledger.extend(other.ledger)
        self.alignment.extend(other.alignment)

    def to_json(self) -> dict:
        out = {
            "variant": "granular",
            "type_f1": float(self.type_f1),
            "slot_f1": float(self.slot_f1),
            "combined_score": float(self.combined_score),
            "exact": {"type_f1": str(self.type_f1), "slot_f1": str(self.slot_f1),
                      "combined_score": str(self.combined_score)},
            "slot_precision": float(self.slot_precision),
            "slot_recall": float(self.slot_recall),
            "counts": {"matched_types": self.matched_types,
                       "ref_templates": self.n_ref_templates,
                       "pred_templates": self.n_pred_templates,
                       "credit": str(self.credit),
                       "ref_fillers": self.n_ref_fillers,
                       "pred_fillers": self.n_pred_fillers},
            "slot_pooling": "micro over all fillers",
            "alignment": [list(a) for a in self.alignment],
            "ledger": [c.to_json() for c in self.ledger],
        }
        if not self.n_ref_templates and not self.n_pred_templates:
            out["flags"] = ["empty"]
        return out


def granular_score(reference: Iterable[TemplateInstance], predicted: Iterable[TemplateInstance],
                   ontology: Ontology | None = None, doc: Document | None = None,
                   doc_id: str | None = None) -> GranularReport:
    """Granular score of one document.

    Templates are aligned to maximize the number of correct fillers (a
    filler is correct when it earns any credit), which for a fixed
    prediction set is the same as maximizing correct minus incorrect.
    Same-type pairs get a small bonus that can break ties but never
    outweigh one correct filler; cross-type pairs are never aligned.
    """
    refs = _canonical(reference)
    preds = _canonical(predicted)
    check_templates(refs, ontology)
    check_templates(preds, ontology)
    report = GranularReport(n_ref_templates=len(refs), n_pred_templates=len(preds),
                            n_ref_fillers=sum(_n_fillers(t) for t in refs),
                            n_pred_fillers=sum(_n_fillers(t) for t in preds))
    if not refs or not preds:
        return report
    bonus_scale = min(len(refs), len(preds)) + 1
    credits = {}
    w = [[0.0] * len(preds) for _ in refs]
    for i, r in enumerate(refs):
        for j, p in enumerate(preds):
            if r.template_type != p.template_type:
                continue
            credits[i, j] = pair_credits(r, p, i, j, doc, ontology)
            w[i][j] = float(len(credits[i, j]) * bonus_scale + 1)
    pairs, _ = align_optimal(w)
    for i, j in pairs:
        if (i, j) not in credits:
            continue
        report.matched_types += 1
        report.alignment.append((doc_id, i, j) if doc_id is not None else (i, j))
        for c in credits[i, j]:
            report.credit += c.credit
            report.ledger.append(c)
    return report
