"""Iterative template extraction as a sequential decision process, with CEAF-family scoring."""
from .core import (Corpus, Document, Filler, Mention, Ontology, SlotDef, TemplateInstance,
                   TemplateType, TemplexError, load_corpus, load_ontology, load_predictions,
                   save_predictions)

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "Filler", "Mention", "Ontology", "SlotDef", "TemplateInstance",
    "TemplateType", "TemplexError", "load_corpus", "load_ontology", "load_predictions",
    "save_predictions", "__version__",
]
