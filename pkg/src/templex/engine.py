"""Episode state, the GRU span-memory transition, and greedy decoding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import tape as T
from .core import Document, Filler, TemplateInstance, TemplexError
from .embed import embed_tokens, encode_spans
from .policy import IncompleteAssignment, greedy_action

if TYPE_CHECKING:
    from .model import Model

DEFAULT_MAX_ITER = 10


class ShapeMismatch(TemplexError):
    pass


def init_gru_params(d: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    p = {}
    for gate in ("z", "r", "h"):
        p[f"gru.w{gate}"] = rng.normal(0.0, 1.0 / math.sqrt(2 * d), (2 * d, d))
        p[f"gru.u{gate}"] = rng.normal(0.0, 1.0 / math.sqrt(d), (d, d))
        p[f"gru.b{gate}"] = np.zeros(d)
    return p


def gru_step(x: T.Var, h: T.Var, p: dict[str, T.Var]) -> T.Var:
    """One GRU step per row: h' = (1 - z) * h + z * tanh(W x + U (r * h) + b)."""
    z = T.sigmoid(T.matmul(x, p["gru.wz"]) + T.matmul(h, p["gru.uz"]) + p["gru.bz"])
    r = T.sigmoid(T.matmul(x, p["gru.wr"]) + T.matmul(h, p["gru.ur"]) + p["gru.br"])
    cand = T.tanh(T.matmul(x, p["gru.wh"]) + T.matmul(r * h, p["gru.uh"]) + p["gru.bh"])
    return (1.0 - z) * h + z * cand


@dataclass(frozen=True)
class EpisodeState:
    memory: T.Var
    generated: tuple[TemplateInstance, ...] = ()
    step: int = 0

    @classmethod
    def initial(cls, n_spans: int, d: int, tape: T.Tape) -> "EpisodeState":
        return cls(tape.const(np.zeros((n_spans, d))))


def state_input(enc, state: EpisodeState) -> T.Var:
    """Span states for the policy: x_enc + x_mem, row by row."""
    mem = state.memory
    enc_shape = enc.shape
    if tuple(enc_shape) != tuple(mem.shape):
        raise ShapeMismatch(f"span encoding {tuple(enc_shape)} vs memory {tuple(mem.shape)}")
    return mem + enc if isinstance(enc, T.Var) else mem + np.asarray(enc, dtype=float)


def materialize(doc: Document, action, slot_vocabulary, type_name: str) -> TemplateInstance:
    null = len(slot_vocabulary) - 1
    fillers: dict[str, list[Filler]] = {}
    for mention, a in zip(doc.mentions, action):
        if a != null:
            fillers.setdefault(slot_vocabulary[a], []).append(Filler.mention(mention.id))
    return TemplateInstance.build(type_name, fillers)


def transition(state: EpisodeState, action, t_hat: T.Var, p: dict[str, T.Var],
               null_index: int, template: TemplateInstance | None = None) -> EpisodeState:
    """Advance span memory: rows with a non-null slot take one GRU step on [s; t_hat].

    Rows assigned the null slot are carried over bit-exactly.
    """
    action = np.asarray(list(action), dtype=int)
    mem = state.memory
    if action.shape[0] != mem.shape[0]:
        raise IncompleteAssignment(
            f"assignment covers {action.shape[0]} spans, memory has {mem.shape[0]}")
    filled = action != null_index
    if not filled.any():
        return state
    m = mem.shape[0]
    s = T.take_rows(p["policy.slot"], action)
    x = T.concat([s, T.broadcast_rows(t_hat, m)], axis=1)
    new_mem = T.where_rows(filled, gru_step(x, mem, p), mem)
    generated = state.generated + ((template,) if template is not None else ())
    return EpisodeState(new_mem, generated, state.step + 1)


def decode(doc: Document, model: "Model", max_iter: int = DEFAULT_MAX_ITER,
           head: str | None = None, enc: np.ndarray | None = None,
           stats: dict | None = None) -> list[TemplateInstance]:
    """Greedy iterative extraction over every template type in declaration order.

    Per type: take the per-span argmax assignment; an all-null assignment
    ends that type's loop without emitting anything, otherwise the template
    is emitted and the span memory advanced. At most ``max_iter`` templates
    are emitted per type. ``stats['policy_evals']`` counts policy calls.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    tape = T.Tape(enabled=False)
    p = model.bind(tape)
    if enc is None:
        enc_v = encode_spans(doc, embed_tokens(doc, model.embedder), p, tape)
    else:
        enc_v = tape.const(enc)
    vocab = model.slot_vocabulary
    null = model.null_index
    out: list[TemplateInstance] = []
    for type_name in model.ontology.type_names:
        state = EpisodeState.initial(len(doc.mentions), model.config.d, tape)
        while state.step < max_iter:
            X = state_input(enc_v, state)
            logp, t_hat = model.policy(X, type_name, p, head)
            if stats is not None:
                stats["policy_evals"] = stats.get("policy_evals", 0) + 1
            action = greedy_action(logp.value)
            if np.all(action == null):
                break
            template = materialize(doc, action, vocab, type_name)
            state = transition(state, action, t_hat, p, null, template)
            out.append(template)
    return out
