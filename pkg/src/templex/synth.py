"""Synthetic corpora with planted, learnable template structure.

A document is a run of template blocks ``TYPE_t (SLOT FILLER)*`` with
noise tokens in between. Each ``SLOT FILLER`` pair is one candidate
mention and the gold filler of that slot; slot markers are specific to
their template type, so a span's own tokens determine its slot. Extra
single-token mentions over noise words serve as distractors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Corpus, Document, Filler, Mention, Ontology, SlotDef, TemplateInstance, TemplateType


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_docs: int = 100
    templates_per_doc_range: tuple[int, int] = (1, 3)
    n_template_types: int = 2
    slots_per_type: int = 3
    filler_vocab: int = 50
    noise_vocab: int = 50
    distractor_rate: float = 0.3

    def __post_init__(self):
        lo, hi = self.templates_per_doc_range
        object.__setattr__(self, "templates_per_doc_range", (int(lo), int(hi)))
        if lo < 0 or hi < lo:
            raise ValueError("templates_per_doc_range needs 0 <= min <= max")
        if not 0.0 <= self.distractor_rate < 1.0:
            raise ValueError("distractor_rate must lie in [0, 1)")
        if self.n_template_types < 1 or self.slots_per_type < 1:
            raise ValueError("need at least one template type and one slot per type")
        if self.filler_vocab < 1 or self.noise_vocab < 1 or self.n_docs < 0:
            raise ValueError("vocabulary sizes must be positive and n_docs non-negative")

    def to_json(self) -> dict:
        out = asdict(self)
        out["templates_per_doc_range"] = list(self.templates_per_doc_range)
        return out


def type_name(t: int) -> str:
    return f"T{t}"


def slot_name(t: int, s: int) -> str:
    return f"T{t}_slot{s}"


def synth_ontology(cfg: SynthConfig) -> Ontology:
    return Ontology(tuple(
        TemplateType(type_name(t), tuple(SlotDef(slot_name(t, s), "entity")
                                         for s in range(cfg.slots_per_type)))
        for t in range(cfg.n_template_types)))


def _document(cfg: SynthConfig, rng: np.random.Generator, doc_id: str):
    lo, hi = cfg.templates_per_doc_range
    k = int(rng.integers(lo, hi + 1))
    kinds = [int(rng.integers(cfg.n_template_types)) for _ in range(k)]
    n_fill = k * cfg.slots_per_type
    # distractors / (fillers + distractors) ~= distractor_rate
    if cfg.distractor_rate > 0:
        expected = cfg.distractor_rate * max(n_fill, 1) / (1.0 - cfg.distractor_rate)
        n_dis = int(rng.poisson(expected))
    else:
        n_dis = 0
    # distractors go into the k + 1 gaps around the blocks
    gaps = np.bincount(rng.integers(0, k + 1, n_dis), minlength=k + 1) if n_dis else np.zeros(k + 1, int)

    tokens: list[str] = []
    mentions: list[Mention] = []
    blocks: list[tuple[int, list[str]]] = []

    def noise(count: int):
        for _ in range(count):
            if rng.random() < 0.5:
                tokens.append(f"noise{int(rng.integers(cfg.noise_vocab))}")
            pos = len(tokens)
            tokens.append(f"w{int(rng.integers(cfg.filler_vocab))}")
            mentions.append(Mention(f"m{len(mentions)}", pos, pos))

    for b, t in enumerate(kinds):
        noise(int(gaps[b]))
        tokens.append(f"TYPE_{type_name(t)}")
        ids = []
        for s in range(cfg.slots_per_type):
            pos = len(tokens)
            tokens.append(f"SLOT_{slot_name(t, s)}")
            tokens.append(f"w{int(rng.integers(cfg.filler_vocab))}")
            mid = f"m{len(mentions)}"
            mentions.append(Mention(mid, pos, pos + 1))
            ids.append(mid)
        blocks.append((t, ids))
    noise(int(gaps[k]))
    if not tokens:
        tokens.append(f"noise{int(rng.integers(cfg.noise_vocab))}")
    doc = Document(doc_id, tuple(tokens), tuple(mentions))
    gold = [TemplateInstance.build(type_name(t), {slot_name(t, s): [Filler(kind="entity", mentions=(mid,))]
                                                  for s, mid in enumerate(ids)})
            for t, ids in blocks]
    return doc, gold


def generate(cfg: SynthConfig) -> Corpus:
    """Deterministic corpus for ``cfg``; gold lists follow block order."""
    rng = np.random.default_rng(cfg.seed)
    docs, gold = [], {}
    for i in range(cfg.n_docs):
        doc, g = _document(cfg, rng, f"doc{i:04d}")
        docs.append(doc)
        gold[doc.id] = tuple(g)
    return Corpus(tuple(docs), gold, synth_ontology(cfg))
