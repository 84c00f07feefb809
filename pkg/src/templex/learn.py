"""Imitation learning against a dynamic oracle, plus checkpoint I/O.

An episode for one (document, template type) rolls the mixed policy: at
each step a coin with bias ``alpha`` picks whether the executed action is
the agent's greedy assignment or the oracle's. The oracle samples one of
the gold templates not yet produced, weighted by the agent's own
likelihood at temperature ``beta``; once all gold is produced it demands
the all-null stop action. The loss is the discounted negative
log-likelihood of the oracle action at every step.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import tape as T
from .core import (Corpus, Document, OntologyMismatch, TemplateInstance, TemplexError,
                   Ontology, parse_ontology)
from .embed import EmbedderConfig, embed_tokens, encode_spans
from .engine import DEFAULT_MAX_ITER, EpisodeState, materialize, state_input, transition
from .model import HEADS, Model, ModelConfig
from .policy import greedy_action

log = logging.getLogger(__name__)

BETA_SETTINGS = ("fixed", "argmax", "xent", "uniform")
CHECKPOINT_FORMAT = "templex-checkpoint"
CHECKPOINT_VERSION = 1


class EmptyGoldSet(TemplexError):
    pass


class DivergenceError(TemplexError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    beta: str | float = "xent"
    gamma: float = 1.0
    learning_rate: float = 0.05
    epochs: int = 30
    seed: int = 0
    head: str = "joint"
    max_iter: int = DEFAULT_MAX_ITER
    d: int = 32
    layers: int = 2
    heads: int = 4
    clip_norm: float | None = 5.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if isinstance(self.beta, str):
            if self.beta not in BETA_SETTINGS:
                raise ValueError(f"beta must be a positive number or one of {BETA_SETTINGS}")
        elif not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.max_iter < 1:
            raise ValueError("epochs must be >= 0 and max_iter >= 1")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(d=self.d, layers=self.layers, heads=self.heads,
                           head=self.head, seed=self.seed)

    def to_json(self) -> dict:
        return asdict(self)


def parse_beta(text: str) -> str | float:
    """'fixed'/'argmax'/'xent'/'uniform' or a positive temperature ('inf' allowed)."""
    text = text.strip().lower()
    if text in BETA_SETTINGS:
        return text
    value = float(text)
    if not value > 0:
        raise ValueError(f"beta must be positive, got {text}")
    return value


def expert_policy(agent_log_probs: Sequence[float], beta: str | float) -> np.ndarray:
    """Distribution over the remaining gold templates (given in dataset order)."""
    lp = np.asarray(agent_log_probs, dtype=float)
    n = lp.shape[0]
    if n == 0:
        raise EmptyGoldSet("no remaining gold templates; the oracle action is the stop action")
    if n == 1 or beta == "fixed":
        out = np.zeros(n)
        out[0] = 1.0
        return out
    if beta == "uniform" or (not isinstance(beta, str) and math.isinf(beta)):
        return np.full(n, 1.0 / n)
    if np.all(np.isneginf(lp)):
        return np.full(n, 1.0 / n)
    if beta == "argmax":
        out = np.zeros(n)
        out[int(np.argmax(lp))] = 1.0
        return out
    temp = 1.0 if beta == "xent" else float(beta)
    z = lp / temp
    z = z - np.max(z)
    w = np.exp(z)
    return w / w.sum()


def gold_actions(doc: Document, golds: Sequence[TemplateInstance], ontology: Ontology,
                 type_name: str) -> list[np.ndarray]:
    """Encode each gold template of ``type_name`` as a full per-span slot assignment.

    Every mention inside a filler takes that slot; all other spans get the
    null slot. Non-span fillers (boolean, categorical) have no span to label.
    """
    vocab = ontology.slot_vocabulary
    null = len(vocab) - 1
    out = []
    for g in golds:
        if g.template_type != type_name:
            continue
        a = np.full(len(doc.mentions), null, dtype=int)
        for slot, fillers in g.fillers:
            si = vocab.index(slot)
            for f in fillers:
                for mid in f.mentions:
                    pos = doc.mention_position(mid)
                    if a[pos] == null:
                        a[pos] = si
        out.append(a)
    return out


@dataclass
class StepRecord:
    oracle: np.ndarray
    executed: np.ndarray
    stop: bool


@dataclass
class EpisodeResult:
    loss: T.Var | None
    steps: list[StepRecord] = field(default_factory=list)
    terms: list[float] = field(default_factory=list)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, len(probs) - 1)


def step_episode(enc: T.Var, golds: list[np.ndarray], remaining: list[int],
                 state: EpisodeState, type_name: str, p: dict[str, T.Var], model: Model,
                 cfg: TrainConfig, rng: np.random.Generator, k: int,
                 planned: StepRecord | None = None):
    """One mixed-policy step; returns (executed action, oracle action, loss term, logp table, t_hat)."""
    X = state_input(enc, state)
    logp, t_hat = model.policy(X, type_name, p, cfg.head)
    lp = logp.value
    m = lp.shape[0]
    rows = np.arange(m)
    if planned is not None:
        oracle, executed = planned.oracle, planned.executed
    else:
        if remaining:
            scores = [float(lp[rows, golds[i]].sum()) for i in remaining]
            probs = expert_policy(scores, cfg.beta)
            oracle = golds[remaining[_sample(probs, rng)]]
        else:
            oracle = np.full(m, model.null_index, dtype=int)
        agent_turn = rng.random() < cfg.alpha
        executed = greedy_action(lp) if agent_turn else oracle
    term = T.scale(T.sum(T.pick(logp, rows, oracle)), -(cfg.gamma ** k)) if m else None
    return executed, oracle, term, lp, t_hat


def run_episode(doc: Document, enc: T.Var, golds: list[np.ndarray], type_name: str,
                p: dict[str, T.Var], model: Model, cfg: TrainConfig,
                rng: np.random.Generator | None = None,
                plan: list[StepRecord] | None = None) -> EpisodeResult:
    """Roll one episode; with ``plan`` the oracle and executed actions are replayed verbatim."""
    tape = enc.tape
    state = EpisodeState.initial(len(doc.mentions), model.config.d, tape)
    remaining = list(range(len(golds)))
    null = model.null_index
    result = EpisodeResult(None)
    k = 0
    while True:
        planned = plan[k] if plan is not None else None
        executed, oracle, term, _, t_hat = step_episode(
            enc, golds, remaining, state, type_name, p, model, cfg, rng, k, planned)
        if term is not None:
            result.loss = term if result.loss is None else result.loss + term
            result.terms.append(float(term.value))
        # only the oracle's stop ends an episode; an all-null agent action leaves
        # the state unchanged and the next step draws a fresh coin
        stop = planned.stop if planned is not None else not remaining
        result.steps.append(StepRecord(oracle, executed, stop))
        if stop:
            break
        for j, gi in enumerate(remaining):
            if np.array_equal(golds[gi], executed):
                del remaining[j]
                break
        state = transition(state, executed, t_hat, p, null)
        k += 1
        if k >= cfg.max_iter:
            break
    return result


def document_loss(doc: Document, gold: Sequence[TemplateInstance], model: Model,
                  cfg: TrainConfig, p: dict[str, T.Var], tape: T.Tape,
                  rng: np.random.Generator | None = None,
                  plans: dict[str, list[StepRecord]] | None = None,
                  token_matrix: np.ndarray | None = None):
    """Summed episode losses over every template type; returns (loss, n_steps, plans)."""
    if token_matrix is None:
        token_matrix = embed_tokens(doc, model.embedder)
    enc = encode_spans(doc, token_matrix, p, tape)
    total = None
    n_steps = 0
    used = {}
    for type_name in model.ontology.type_names:
        golds = gold_actions(doc, gold, model.ontology, type_name)
        res = run_episode(doc, enc, golds, type_name, p, model, cfg, rng,
                          plans[type_name] if plans is not None else None)
        used[type_name] = res.steps
        n_steps += len(res.steps)
        if res.loss is not None:
            total = res.loss if total is None else total + res.loss
    if total is None:
        total = tape.const(0.0)
    return total, n_steps, used


def _clip(grads: dict[str, np.ndarray], max_norm: float | None) -> None:
    if max_norm is None:
        return
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        f = max_norm / norm
        for k in grads:
            grads[k] *= f


def train(corpus: Corpus, cfg: TrainConfig, model: Model | None = None,
          on_epoch: Callable[[int, float], None] | None = None):
    """Direct policy learning with plain gradient descent; returns (model, [(epoch, mean_loss)])."""
    if not any(corpus.gold.get(d.id) for d in corpus.documents):
        raise ValueError("training corpus has no gold templates")
    model = model.copy() if model is not None else Model.initialize(corpus.ontology, cfg.model_config())
    rng = np.random.default_rng(cfg.seed)
    docs = list(corpus.documents)
    tokens = {d.id: embed_tokens(d, model.embedder) for d in docs}
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(docs))
        total, steps = 0.0, 0
        for i in order:
            doc = docs[i]
            tape = T.Tape()
            p = model.bind(tape)
            loss, n, _ = document_loss(doc, corpus.gold.get(doc.id, ()), model, cfg, p, tape,
                                       rng, token_matrix=tokens[doc.id])
            total += float(loss.value)
            steps += n
            if not loss.requires_grad:
                continue
            tape.backward(loss)
            grads = {k: v.grad for k, v in p.items() if v.grad is not None}
            _clip(grads, cfg.clip_norm)
            for k, g in grads.items():
                with np.errstate(over="ignore", invalid="ignore"):
                    model.params[k] = model.params[k] - cfg.learning_rate * g
                if not np.all(np.isfinite(model.params[k])):
                    raise DivergenceError(f"parameter {k} became non-finite in epoch {epoch}")
        mean = total / max(steps, 1)
        trace.append((epoch, mean))
        log.info("epoch %d mean loss %.6f", epoch, mean)
        if on_epoch is not None:
            on_epoch(epoch, mean)
    return model, trace


# ---------------------------------------------------------------- gradients

def check_gradients(loss_fn: Callable[[dict[str, T.Var], T.Tape], T.Var],
                    params: dict[str, np.ndarray], epsilon: float = 1e-4,
                    floor: float = 1e-6) -> float:
    """Max elementwise relative error between tape and central-difference gradients.

    Relative error is |g - f| / max(|g|, |f|, floor); ``floor`` keeps entries
    whose true gradient is essentially zero from dividing noise by noise.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    tape = T.Tape()
    p = {k: tape.var(v) for k, v in params.items()}
    out = loss_fn(p, tape)
    tape.backward(out)
    worst = 0.0
    for name, value in params.items():
        g_tape = p[name].grad if p[name].grad is not None else np.zeros_like(value)
        g_fd = np.zeros_like(value)
        flat = g_fd.reshape(-1)
        for idx in range(value.size):
            vals = []
            for sign in (1.0, -1.0):
                bumped = dict(params)
                arr = value.copy().reshape(-1)
                arr[idx] += sign * epsilon
                bumped[name] = arr.reshape(value.shape)
                off = T.Tape(enabled=False)
                vals.append(float(loss_fn({k: off.const(v) for k, v in bumped.items()}, off).value))
            flat[idx] = (vals[0] - vals[1]) / (2 * epsilon)
        denom = np.maximum(np.maximum(np.abs(g_tape), np.abs(g_fd)), floor)
        err = float(np.max(np.abs(g_tape - g_fd) / denom)) if value.size else 0.0
        worst = max(worst, err)
    return worst


def grad_check(model: Model, doc: Document, gold: Sequence[TemplateInstance],
               cfg: TrainConfig, epsilon: float = 1e-4, seed: int | None = None) -> float:
    """Compare tape gradients of the full-episode loss with finite differences.

    The oracle and executed action sequences are drawn once and then frozen,
    so every perturbed evaluation follows the same trajectory.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    probe = T.Tape(enabled=False)
    _, _, plans = document_loss(doc, gold, model, cfg, model.bind(probe), probe, rng)
    tokens = embed_tokens(doc, model.embedder)

    def loss_fn(p, tape):
        loss, _, _ = document_loss(doc, gold, model, cfg, p, tape, None, plans, tokens)
        return loss
    return check_gradients(loss_fn, model.params, epsilon)


# -------------------------------------------------------------- checkpoints

def checkpoint_json(model: Model, cfg: TrainConfig | None = None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "ontology_hash": model.ontology.fingerprint(),
        "ontology": model.ontology.to_json(),
        "model_config": model.config_json(),
        "embedder": model.embedder.to_json(),
        "train_config": cfg.to_json() if cfg is not None else None,
        "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                   for k, v in sorted(model.params.items())},
    }


def save_checkpoint(model: Model, path, cfg: TrainConfig | None = None) -> None:
    blob = json.dumps(checkpoint_json(model, cfg), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(blob + "\n", encoding="utf-8")


def load_checkpoint(path, ontology: Ontology | None = None) -> tuple[Model, dict | None]:
    """Load a checkpoint; refuses one trained under a different ontology."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.get("format") != CHECKPOINT_FORMAT or raw.get("version") != CHECKPOINT_VERSION:
        raise TemplexError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    onto = parse_ontology(raw["ontology"])
    if onto.fingerprint() != raw["ontology_hash"]:
        raise OntologyMismatch(f"{path}: stored ontology does not match its hash")
    if ontology is not None and ontology.fingerprint() != raw["ontology_hash"]:
        raise OntologyMismatch(
            f"{path}: checkpoint was trained on ontology {raw['ontology_hash'][:12]}, "
            f"corpus uses {ontology.fingerprint()[:12]}")
    params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"])
              for k, v in raw["params"].items()}
    model = Model(onto, ModelConfig(**raw["model_config"]), EmbedderConfig(**raw["embedder"]),
                  params)
    return model, raw.get("train_config")


def loss_trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "mean_loss"])
    for epoch, loss in trace:
        w.writerow([epoch, repr(float(loss))])
    return buf.getvalue()


def predict_corpus(model: Model, corpus: Corpus, max_iter: int = DEFAULT_MAX_ITER,
                   head: str | None = None) -> dict[str, list[TemplateInstance]]:
    from .engine import decode
    return {d.id: decode(d, model, max_iter, head) for d in corpus.documents}
