"""Shared builders for tests."""
import math

import numpy as np

from templex.core import Document, Filler, Mention, TemplateInstance, parse_ontology
from templex.model import Model

ONTO = parse_ontology({"template_types": [
    {"name": "Attack", "slots": [{"name": "Victim"}, {"name": "Weapon"}]},
    {"name": "Arrest", "slots": [{"name": "Suspect"}]},
]})


def doc(n: int = 8) -> Document:
    return Document("d", tuple(f"t{i}" for i in range(n)),
                    tuple(Mention(f"m{i}", i, i) for i in range(n)))


def ent(*ids) -> Filler:
    return Filler(kind="entity", mentions=tuple(ids))


def men(mid) -> Filler:
    return Filler.mention(mid)


def tmpl(ttype, **slots) -> TemplateInstance:
    return TemplateInstance.build(ttype, slots)


def singletonize(templates):
    """Predicted-style copy: every entity mention becomes its own filler."""
    out = []
    for t in templates:
        out.append(TemplateInstance.build(t.template_type, {
            s: [men(m) for f in fs for m in f.mentions] for s, fs in t.fillers}))
    return out


def perturb(templates, ontology, d, rng: np.random.Generator):
    """Randomly drop, add, move and duplicate predicted singleton fillers."""
    out = []
    ids = [m.id for m in d.mentions]
    for t in singletonize(templates):
        slots = {s: list(fs) for s, fs in t.fillers}
        names = ontology.type(t.template_type).slot_names
        for s in list(slots):
            slots[s] = [f for f in slots[s] if rng.random() > 0.3]
        for _ in range(int(rng.integers(0, 3))):
            s = names[int(rng.integers(len(names)))]
            slots.setdefault(s, []).append(men(ids[int(rng.integers(len(ids)))]))
        out.append(TemplateInstance.build(t.template_type, slots))
        if rng.random() < 0.2:
            out.append(out[-1])
    if rng.random() < 0.3 and out:
        out.pop(int(rng.integers(len(out))))
    return out


def bias_toward_null(model: Model, strength: float = 50.0) -> Model:
    """Make the null slot win every argmax, whatever the spans look like."""
    m = model.copy()
    null = m.null_index
    d = m.config.d
    v = np.ones(d) / math.sqrt(d)
    m.params["policy.slot"][null] = strength * v
    m.params["policy.tf.lnf.g"] = np.zeros(d)
    m.params["policy.tf.lnf.b"] = v
    m.params["policy.ind.w2"] = np.zeros((d, d))
    m.params["policy.ind.b2"] = 20.0 * v
    others = [i for i in range(len(m.slot_vocabulary)) if i != null]
    m.params["policy.slot"][others] *= 0.01
    return m
