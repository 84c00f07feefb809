from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from templex.core import Document, Filler, Mention, parse_ontology
from templex.metrics import granular_score, score_corpus
from templex.metrics.granular import filler_credit, ladder_credit
from templex.synth import SynthConfig, generate

from .helpers import perturb, singletonize, tmpl

ONTO = parse_ontology({"template_types": [
    {"name": "Protest", "slots": [
        {"name": "Who"},
        {"name": "Event", "kind": "event", "time_irrealis": True},
        {"name": "Violent", "kind": "boolean"},
        {"name": "Scale", "kind": "categorical"}]},
    {"name": "Strike", "slots": [{"name": "Who"}]},
]})

DOC = Document("d", tuple(f"t{i}" for i in range(8)), (
    Mention("name", 0, 0, informativity="name"), Mention("nom", 1, 1, informativity="nominal"),
    Mention("pro", 2, 2, informativity="pronoun"), Mention("lone", 3, 3, informativity="pronoun"),
    Mention("ev", 4, 4), Mention("ev2", 5, 5), Mention("x", 6, 6, informativity="name"),
    Mention("y", 7, 7, informativity="nominal")))


def ent(*ids, **kw):
    return Filler(kind="entity", mentions=tuple(ids), **kw)


def score(ref, pred):
    return granular_score(ref, pred, ONTO, DOC)


def test_ladder_values():
    assert ladder_credit("name", {"name", "nominal"}) == 1
    assert ladder_credit("nominal", {"name", "nominal"}) == Fraction(1, 2)
    assert ladder_credit("nominal", {"nominal", "pronoun"}) == 1
    assert ladder_credit("pronoun", {"name", "nominal", "pronoun"}) == Fraction(1, 4)
    assert ladder_credit("pronoun", {"nominal", "pronoun"}) == Fraction(1, 2)
    assert ladder_credit("pronoun", {"pronoun"}) == 1


def test_perfect_prediction_scores_one():
    gold = [tmpl("Protest", Who=[ent("name", "nom", "pro")],
                 Event=[Filler("event", ("ev",), time=frozenset({"t"}), irrealis="future")],
                 Violent=[Filler("boolean", value=True)], Scale=[Filler("categorical", value="large")]),
            tmpl("Strike", Who=[ent("x")])]
    r = score(gold, gold)
    assert r.combined_score == 1 and r.type_f1 == 1 and r.slot_f1 == 1


def test_pronoun_with_name_and_nominal_gets_quarter():
    gold = [tmpl("Strike", Who=[ent("name", "nom", "pro")])]
    r = score(gold, [tmpl("Strike", Who=[Filler.mention("pro")])])
    assert r.credit == Fraction(1, 4)
    assert r.slot_f1 == Fraction(1, 4)
    assert r.combined_score == Fraction(1, 4)


def test_nominal_with_name_gets_half():
    gold = [tmpl("Strike", Who=[ent("name", "nom")])]
    r = score(gold, [tmpl("Strike", Who=[Filler.mention("nom")])])
    assert r.credit == Fraction(1, 2)


def test_best_mention_counts_and_stray_mention_zeroes():
    gold = [tmpl("Strike", Who=[ent("name", "nom", "pro")])]
    assert score(gold, [tmpl("Strike", Who=[ent("name", "pro")])]).credit == 1
    assert score(gold, [tmpl("Strike", Who=[ent("name", "x")])]).credit == 0


def test_time_and_irrealis_partial_credit():
    ref = Filler("event", ("ev",), time=frozenset({"2020"}), irrealis="future")
    slot = ONTO.type("Protest").slot("Event")
    wrong_irr = Filler("event", ("ev",), time=frozenset({"2020"}), irrealis="hypothetical")
    assert filler_credit(ref, wrong_irr, slot, DOC)[0] == Fraction(3, 4)
    both_wrong = Filler("event", ("ev",), time=frozenset(), irrealis=None)
    assert filler_credit(ref, both_wrong, slot, DOC)[0] == Fraction(1, 2)
    other = Filler("event", ("ev2",), time=frozenset({"2020"}), irrealis="future")
    assert filler_credit(ref, other, slot, DOC)[0] == 0
    r = score([tmpl("Protest", Event=[ref])], [tmpl("Protest", Event=[wrong_irr])])
    assert r.combined_score == Fraction(3, 4)
    assert r.ledger[0].to_json()["irrealis_match"] is False


def test_event_credit_requires_subset():
    ref = Filler("event", ("ev", "ev2"))
    slot = ONTO.type("Protest").slot("Event")
    assert filler_credit(ref, Filler("event", ("ev",)), slot, DOC)[1] == 1
    assert filler_credit(ref, Filler("event", ("ev", "x")), slot, DOC)[1] == 0


def test_type_f1_and_unmatched_types():
    gold = [tmpl("Strike", Who=[ent("x")]), tmpl("Strike", Who=[ent("y")])]
    pred = [tmpl("Strike", Who=[ent("x")]), tmpl("Protest", Who=[ent("y")])]
    r = score(gold, pred)
    assert r.type_f1 == Fraction(1, 2)
    assert r.slot_f1 == Fraction(1, 2)
    assert r.combined_score == Fraction(1, 4)


def test_alignment_prefers_more_correct_fillers():
    gold = [tmpl("Strike", Who=[ent("x")]), tmpl("Strike", Who=[ent("y"), ent("name")])]
    pred = [tmpl("Strike", Who=[ent("y"), ent("name")])]
    r = score(gold, pred)
    assert r.alignment == [(1, 0)] and r.credit == 2


def test_empty_inputs():
    r = score([], [])
    assert r.combined_score == 0 and r.to_json()["flags"] == ["empty"]
    r = score([tmpl("Strike", Who=[ent("x")])], [])
    assert r.combined_score == 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), pseed=st.integers(0, 10_000))
def test_combined_is_exact_product(seed, pseed):
    c = generate(SynthConfig(seed=seed, n_docs=3))
    rng = np.random.default_rng(pseed)
    preds = {d.id: perturb(c.gold[d.id], c.ontology, d, rng) for d in c.documents}
    r = score_corpus(c, preds, "granular")
    assert isinstance(r.combined_score, Fraction)
    assert r.combined_score == r.type_f1 * r.slot_f1
    assert 0 <= r.combined_score <= 1
    exact = r.to_json()["exact"]
    assert Fraction(exact["combined_score"]) == r.combined_score


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_synthetic_identity(seed):
    c = generate(SynthConfig(seed=seed, n_docs=3, templates_per_doc_range=(1, 3)))
    assert score_corpus(c, c.gold, "granular").combined_score == 1
    preds = {d.id: singletonize(c.gold[d.id]) for d in c.documents}
    assert score_corpus(c, preds, "granular").combined_score == 1
