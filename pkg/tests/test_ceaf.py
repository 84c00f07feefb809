import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from templex.core import OntologyMismatch
from templex.metrics import (UnknownDocument, entity_score, phi3, phi4, phi_subset,
                             score_corpus)
from templex.metrics.ceaf import PHIS, VARIANTS
from templex.synth import SynthConfig, generate

from .helpers import ONTO, doc, ent, men, perturb, singletonize, tmpl

M = lambda *ids: frozenset(ids)  # noqa: E731


def test_phi_definitions():
    obama_he = M("obama", "he")
    assert phi3(obama_he, M("he")) == 1 and phi_subset(obama_he, M("he")) == 1
    assert phi_subset(obama_he, M("he", "trump")) == 0 and phi3(obama_he, M("he", "trump")) == 1
    assert phi4(M("a", "b"), M("b", "c")) == 0.5
    assert phi_subset(M("a"), M()) == 0


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("phi", PHIS)
def test_identity(variant, phi):
    d = doc()
    gold = [tmpl("Attack", Victim=[ent("m0", "m1"), ent("m2")], Weapon=[ent("m3")]),
            tmpl("Attack", Victim=[ent("m4")]), tmpl("Arrest", Suspect=[ent("m5", "m6")])]
    r = entity_score(gold, gold, phi, variant, d, ONTO)
    assert r.micro == (1.0, 1.0, 1.0)
    assert r.macro == (1.0, 1.0, 1.0)


def _four_vs_three():
    d = doc()
    gold = [tmpl("Attack", Victim=[ent("m0", "m1"), ent("m2"), ent("m3")])]
    pred = [tmpl("Attack", Victim=[men("m0"), men("m1"), men("m2"), men("m3")])]
    return d, gold, pred


def test_alignment_constraint_penalizes_precision():
    d, gold, pred = _four_vs_three()
    assert entity_score(gold, pred, "phi3", "ree_def", d, ONTO).precision == 0.75
    assert entity_score(gold, pred, "phi3", "rme_relaxed", d, ONTO).precision == 1.0


def test_ree_impl_reports_type_row():
    d, gold, pred = _four_vs_three()
    rows = entity_score(gold, pred, "phi3", "ree_impl", d, ONTO).to_json()["slots"]
    row = next(r for r in rows if r["slot"] == "type")
    assert row["legacy"] and row["f1"] == 1.0


def test_phi_subset_severity():
    d = doc()
    gold = [tmpl("Attack", Victim=[ent("m0", "m1")])]
    pred = [tmpl("Attack", Victim=[ent("m0", "m1", "m7")])]
    assert entity_score(gold, pred, "phi_subset", "rme_relaxed", d, ONTO).precision == 0.0
    assert entity_score(gold, pred, "phi3", "rme_relaxed", d, ONTO).slots["Attack.Victim"].p_num == 2


def test_unaligned_templates_only_add_denominators():
    d = doc()
    gold = [tmpl("Attack", Victim=[ent("m0")])]
    pred = [tmpl("Attack", Victim=[men("m0")]), tmpl("Arrest", Suspect=[men("m1")])]
    r = entity_score(gold, pred, "phi3", "rme_relaxed", d, ONTO)
    assert (r.precision, r.recall) == (0.5, 1.0)
    assert r.alignment == [(0, 0)]


def test_cross_type_pairs_never_align():
    d = doc()
    gold = [tmpl("Arrest", Suspect=[ent("m0")])]
    pred = [tmpl("Attack", Victim=[men("m0")])]
    r = entity_score(gold, pred, "phi3", "rme_relaxed", d, ONTO)
    assert r.alignment == [] and r.f1 == 0.0


def test_mentions_compared_by_boundaries():
    from templex.core import Document, Mention
    d = Document("d", ("a", "b"), (Mention("g1", 0, 1), Mention("p1", 0, 1)))
    gold = [tmpl("Arrest", Suspect=[ent("g1")])]
    pred = [tmpl("Arrest", Suspect=[men("p1")])]
    assert entity_score(gold, pred, "phi3", "ree_def", d, ONTO).f1 == 1.0


def test_ontology_mismatch():
    with pytest.raises(OntologyMismatch):
        entity_score([tmpl("Arrest", Victim=[ent("m0")])], [], "phi3", "rme", doc(), ONTO)


def _corpus_pair(seed):
    c = generate(SynthConfig(seed=seed, n_docs=3, templates_per_doc_range=(1, 3)))
    return c


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), pseed=st.integers(0, 10_000))
def test_bounds_and_dominance(seed, pseed):
    c = _corpus_pair(seed)
    rng = np.random.default_rng(pseed)
    preds = {d.id: perturb(c.gold[d.id], c.ontology, d, rng) for d in c.documents}
    for phi in PHIS:
        scores = {v: score_corpus(c, preds, v, phi) for v in VARIANTS}
        for r in scores.values():
            for x in (*r.micro, *r.macro):
                assert 0.0 <= x <= 1.0
            for row in r.slot_rows():
                assert 0.0 <= row["p"] <= 1.0 and 0.0 <= row["r"] <= 1.0
        assert scores["ree_def"].precision <= scores["rme_relaxed"].precision + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), pseed=st.integers(0, 10_000))
def test_rme_monotonicity(seed, pseed):
    d = doc(10)
    rng = np.random.default_rng(pseed)
    gold = [tmpl("Attack", Victim=[ent("m0", "m1"), ent("m2")], Weapon=[ent("m3")])]
    pred = perturb(gold, ONTO, d, rng)[:1] or [tmpl("Attack")]
    base = entity_score(gold, pred, "phi3", "rme_relaxed", d, ONTO)
    t = pred[0]
    slots = {s: list(fs) for s, fs in t.fillers}
    good = {s: fs + [men("m2")] for s, fs in {**{"Victim": []}, **slots}.items()}
    more_correct = entity_score(gold, [tmpl("Attack", **good)], "phi3", "rme_relaxed", d, ONTO)
    assert more_correct.recall >= base.recall
    bad = {s: fs + [men("m9")] for s, fs in {**{"Victim": []}, **slots}.items()}
    more_wrong = entity_score(gold, [tmpl("Attack", **bad)], "phi3", "rme_relaxed", d, ONTO)
    assert more_wrong.precision <= base.precision


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_synthetic_identity_all_variants(seed):
    c = _corpus_pair(seed)
    for v in VARIANTS:
        for phi in PHIS:
            r = score_corpus(c, c.gold, v, phi)
            if any(c.gold.values()):
                assert r.micro == (1.0, 1.0, 1.0)


def test_singleton_predictions_of_gold_score_one_under_rme():
    c = _corpus_pair(4)
    preds = {d.id: singletonize(c.gold[d.id]) for d in c.documents}
    assert score_corpus(c, preds).f1 == 1.0


def test_empty_predictions():
    c = _corpus_pair(1)
    r = score_corpus(c, {})
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
    assert "empty_pred" in r.flags


def test_empty_gold_and_predictions_flagged():
    c = generate(SynthConfig(seed=0, n_docs=2, templates_per_doc_range=(0, 0)))
    r = score_corpus(c, {})
    assert r.micro == (0.0, 0.0, 0.0)
    assert set(r.flags) == {"empty_pred", "empty_ref"}


def test_pooling_across_documents():
    from templex.core import Corpus
    d1, d2 = doc(), doc()
    object.__setattr__(d2, "id", "e")
    gold = [tmpl("Attack", Victim=[ent("m0"), ent("m1"), ent("m2"), ent("m3")])]
    pred = [tmpl("Attack", Victim=[men("m0"), men("m1"), men("m6"), men("m7")])]
    c = Corpus((d1, d2), {"d": tuple(gold), "e": tuple(gold)}, ONTO)
    r = score_corpus(c, {"d": pred, "e": pred})
    assert r.precision == 4 / 8 and r.recall == 4 / 8


def test_unknown_prediction_document():
    with pytest.raises(UnknownDocument):
        score_corpus(_corpus_pair(0), {"nope": []})
