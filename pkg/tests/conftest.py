import json

import pytest

from templex.core import parse_corpus, parse_ontology

ONTOLOGY = {
    "template_types": [
        {"name": "Bombing", "slots": [
            {"name": "Perpetrator", "kind": "entity"},
            {"name": "Victim", "kind": "entity"},
            {"name": "Weapon", "kind": "entity"},
        ]},
        {"name": "Kidnapping", "slots": [
            {"name": "Perpetrator", "kind": "entity"},
            {"name": "Target", "kind": "entity"},
        ]},
    ]
}

CORPUS = {
    "documents": [
        {"id": "d1",
         "tokens": "the rebels bombed the embassy with a truck bomb and he fled".split(),
         "mentions": [
             {"id": "m1", "left": 1, "right": 1, "informativity": "nominal"},
             {"id": "m2", "left": 3, "right": 4},
             {"id": "m3", "left": 6, "right": 8},
             {"id": "m4", "left": 10, "right": 10, "informativity": "pronoun"},
         ]},
        {"id": "d2", "tokens": "gunmen seized the mayor".split(),
         "mentions": [{"id": "m1", "left": 0, "right": 0}, {"id": "m2", "left": 2, "right": 3}]},
    ],
    "gold": {
        "d1": [{"type": "Bombing", "fillers": {
            "Perpetrator": [{"entity": ["m1", "m4"]}],
            "Victim": [{"entity": ["m2"]}],
            "Weapon": [{"entity": ["m3"]}]}}],
        "d2": [{"type": "Kidnapping", "fillers": {
            "Perpetrator": [{"entity": ["m1"]}], "Target": [{"entity": ["m2"]}]}}],
    },
}


@pytest.fixture
def ontology():
    return parse_ontology(ONTOLOGY)


@pytest.fixture
def corpus(ontology):
    return parse_corpus(CORPUS, ontology)


@pytest.fixture
def corpus_files(tmp_path):
    onto = tmp_path / "ontology.json"
    corp = tmp_path / "corpus.json"
    onto.write_text(json.dumps(ONTOLOGY))
    corp.write_text(json.dumps(CORPUS))
    return corp, onto


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
