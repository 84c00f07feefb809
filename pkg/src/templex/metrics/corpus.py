"""Document-pooled scoring of a prediction map against a gold corpus."""
from __future__ import annotations

from typing import Iterable, Mapping

from ..core import Corpus, TemplateInstance, TemplexError
from .ceaf import ScoreReport, entity_score, normalize_variant, similarity_fn
from .granular import GranularReport, granular_score


class UnknownDocument(TemplexError):
    pass


def score_corpus(corpus: Corpus, predictions: Mapping[str, Iterable[TemplateInstance]],
                 variant: str = "rme_relaxed", phi: str = "phi3") -> ScoreReport | GranularReport:
    """Pool per-slot numerators and denominators over every corpus document.

    ``variant='granular'`` returns a :class:`GranularReport`; anything else is
    a CEAF variant scored with ``phi``. Documents absent from ``predictions``
    count as empty predictions.
    """
    unknown = sorted(set(predictions) - {d.id for d in corpus.documents})
    if unknown:
        raise UnknownDocument(f"predictions for unknown documents: {', '.join(unknown)}")
    if variant == "granular":
        total = GranularReport()
        for doc in corpus.documents:
            total.merge(granular_score(corpus.gold.get(doc.id, ()), predictions.get(doc.id, ()),
                                       corpus.ontology, doc, doc.id))
        return total
    variant = normalize_variant(variant)
    total = ScoreReport(variant, similarity_fn(phi).__name__)
    for doc in corpus.documents:
        total.merge(entity_score(corpus.gold.get(doc.id, ()), predictions.get(doc.id, ()),
                                 phi, variant, doc, corpus.ontology, doc.id))
    return total
