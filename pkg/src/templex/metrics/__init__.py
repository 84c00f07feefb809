"""CEAF-family and Granular template-extraction metrics."""
from .align import BACKEND, TooLarge, align_bruteforce, align_optimal
from .ceaf import (PHIS, VARIANTS, ScoreReport, Tally, entity_score, phi3, phi4, phi_subset,
                   similarity_fn)
from .corpus import UnknownDocument, score_corpus
from .granular import GranularReport, filler_credit, granular_score, ladder_credit

__all__ = [
    "BACKEND", "TooLarge", "align_bruteforce", "align_optimal", "PHIS", "VARIANTS",
    "ScoreReport", "Tally", "entity_score", "phi3", "phi4", "phi_subset", "similarity_fn",
    "UnknownDocument", "score_corpus", "GranularReport", "filler_credit", "granular_score",
    "ladder_credit",
]
