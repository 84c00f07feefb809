"""Slot-assignment policy heads.

Both heads map span states X (M x d) and a template type to a per-span
distribution over the slot vocabulary, with slots outside the type's slot
set (plus the null slot) masked to probability exactly zero. The output
projection is the slot embedding table itself.
"""
from __future__ import annotations

import math

import numpy as np

from . import tape as T
from .core import NULL_SLOT, Ontology, TemplexError, UnknownTemplateType


class IncompleteAssignment(TemplexError):
    pass


def init_policy_params(ontology: Ontology, d: int, layers: int, heads: int,
                       rng: np.random.Generator, ff_mult: int = 4) -> dict[str, np.ndarray]:
    if d % heads:
        raise ValueError(f"width {d} not divisible by {heads} heads")
    n_types = len(ontology.template_types)
    n_slots = len(ontology.slot_vocabulary)
    s = 1.0 / math.sqrt(d)
    p = {
        "policy.template": rng.normal(0.0, 1.0, (n_types, d)),
        "policy.slot": rng.normal(0.0, s * 2, (n_slots, d)),
        "policy.ind.w1": rng.normal(0.0, 1.0 / math.sqrt(2 * d), (2 * d, d)),
        "policy.ind.b1": np.zeros(d),
        "policy.ind.w2": rng.normal(0.0, s, (d, d)),
        "policy.ind.b2": np.zeros(d),
    }
    f = ff_mult * d
    for layer in range(layers):
        pre = f"policy.tf.{layer}."
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        for name in ("q", "k", "v", "o"):
            p[pre + "w" + name] = rng.normal(0.0, s, (d, d))
            p[pre + "b" + name] = np.zeros(d)
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "ff.w1"] = rng.normal(0.0, s, (d, f))
        p[pre + "ff.b1"] = np.zeros(f)
        p[pre + "ff.w2"] = rng.normal(0.0, 1.0 / math.sqrt(f), (f, d))
        p[pre + "ff.b2"] = np.zeros(d)
    p["policy.tf.lnf.g"] = np.ones(d)
    p["policy.tf.lnf.b"] = np.zeros(d)
    return p


def slot_mask(ontology: Ontology, type_name: str) -> np.ndarray:
    """True for the type's own slots and the null slot."""
    allowed = set(ontology.type(type_name).slot_names) | {NULL_SLOT}
    return np.array([s in allowed for s in ontology.slot_vocabulary])


def _type_index(ontology: Ontology, type_name: str) -> int:
    try:
        return ontology.type_names.index(type_name)
    except ValueError:
        raise UnknownTemplateType(f"unknown template type {type_name!r}") from None


def independent_policy(X: T.Var, type_name: str, p: dict[str, T.Var], ontology: Ontology):
    """Per-span log-probabilities from an FFN over [t; x]; returns (log_probs, t_hat = t)."""
    ti = _type_index(ontology, type_name)
    mask = slot_mask(ontology, type_name)
    t = p["policy.template"][ti]
    m = X.shape[0]
    h = T.concat([T.broadcast_rows(t, m), X], axis=1)
    h = T.tanh(T.matmul(h, p["policy.ind.w1"]) + p["policy.ind.b1"])
    h = T.tanh(T.matmul(h, p["policy.ind.w2"]) + p["policy.ind.b2"])
    logits = T.matmul(h, T.transpose(p["policy.slot"], (1, 0)))
    return T.log_softmax(logits, mask=np.broadcast_to(mask, logits.shape)), t


def _attention(z: T.Var, pre: str, p: dict[str, T.Var], heads: int) -> T.Var:
    n, d = z.shape
    dh = d // heads

    def split(x):
        return T.transpose(T.reshape(x, (n, heads, dh)), (1, 0, 2))   # (H, n, dh)

    q = split(T.matmul(z, p[pre + "wq"]) + p[pre + "bq"])
    k = split(T.matmul(z, p[pre + "wk"]) + p[pre + "bk"])
    v = split(T.matmul(z, p[pre + "wv"]) + p[pre + "bv"])
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
    att = T.softmax(scores)
    ctx = T.reshape(T.transpose(T.matmul(att, v), (1, 0, 2)), (n, d))
    return T.matmul(ctx, p[pre + "wo"]) + p[pre + "bo"]


def span_transformer(seq: T.Var, p: dict[str, T.Var], layers: int, heads: int) -> T.Var:
    """Pre-norm self-attention encoder without positional terms."""
    h = seq
    for layer in range(layers):
        pre = f"policy.tf.{layer}."
        h = h + _attention(T.layer_norm(h, p[pre + "ln1.g"], p[pre + "ln1.b"]), pre, p, heads)
        z = T.layer_norm(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
        z = T.tanh(T.matmul(z, p[pre + "ff.w1"]) + p[pre + "ff.b1"])
        h = h + T.matmul(z, p[pre + "ff.w2"]) + p[pre + "ff.b2"]
    return T.layer_norm(h, p["policy.tf.lnf.g"], p["policy.tf.lnf.b"])


def joint_policy(X: T.Var, type_name: str, p: dict[str, T.Var], ontology: Ontology,
                 layers: int = 2, heads: int = 4):
    """Run the span transformer over (t, x_1..x_M); returns (log_probs, t_hat)."""
    ti = _type_index(ontology, type_name)
    mask = slot_mask(ontology, type_name)
    t = p["policy.template"][ti]
    seq = T.concat([T.reshape(t, (1, -1)), X], axis=0)
    out = span_transformer(seq, p, layers, heads)
    t_hat = out[0]
    xs = out[1:]
    logits = T.matmul(xs, T.transpose(p["policy.slot"], (1, 0)))
    return T.log_softmax(logits, mask=np.broadcast_to(mask, logits.shape)), t_hat


def action_log_prob(dist: np.ndarray, action) -> float:
    """log of the factorized action probability; -inf if any chosen slot has probability 0.

    ``dist`` is the (M x |S|) probability table, ``action`` one slot index per span.
    """
    dist = np.asarray(dist, dtype=float)
    action = list(action)
    if len(action) != dist.shape[0] or any(a is None for a in action):
        raise IncompleteAssignment(
            f"assignment covers {len(action)} spans, distribution has {dist.shape[0]}")
    if not action:
        return 0.0
    idx = np.asarray(action, dtype=int)
    if idx.min() < 0 or idx.max() >= dist.shape[1]:
        raise IncompleteAssignment("assignment uses a slot index outside the vocabulary")
    chosen = dist[np.arange(len(idx)), idx]
    if np.any(chosen <= 0.0):
        return -math.inf
    return float(np.sum(np.log(chosen)))


def greedy_action(log_probs: np.ndarray) -> np.ndarray:
    """Per-span argmax; numpy picks the first maximum, and the null slot is last."""
    if log_probs.shape[0] == 0:
        return np.zeros(0, dtype=int)
    return np.argmax(log_probs, axis=1)
