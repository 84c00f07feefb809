"""Token embedder surrogate and the span encoder that builds initial span states."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tape as T
from .core import Document


@dataclass(frozen=True)
class EmbedderConfig:
    d: int = 32
    seed: int = 0
    # kept for interface parity; the per-token surrogate makes chunking a no-op
    chunk_size: int = 1024

    def __post_init__(self):
        if self.d <= 0 or self.d % 2:
            raise ValueError(f"embedding width must be a positive even integer, got {self.d}")

    def to_json(self) -> dict:
        return {"d": self.d, "seed": self.seed, "chunk_size": self.chunk_size}


@lru_cache(maxsize=1 << 16)
def _token_vector(token: str, seed: int, d: int) -> np.ndarray:
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                        key=int(seed).to_bytes(8, "little", signed=True))
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def embed_tokens(doc: Document, cfg: EmbedderConfig) -> np.ndarray:
    """Unit-norm token vectors; each row depends only on (token string, seed)."""
    if not doc.tokens:
        return np.zeros((0, cfg.d))
    return np.stack([_token_vector(t, cfg.seed, cfg.d) for t in doc.tokens])


def positional_encoding(offset: int, d: int) -> np.ndarray:
    if offset < 0:
        raise ValueError("offset must be non-negative")
    return positional_table(np.array([offset]), d)[0]


def positional_table(offsets, d: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float)
    k = np.arange(d // 2)
    freq = 1.0 / np.power(10000.0, 2 * k / d)
    ang = offsets[:, None] * freq[None, :]
    out = np.empty((len(offsets), d))
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


def init_embedder_params(cfg: EmbedderConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d = cfg.d
    return {
        "embed.query": rng.normal(0.0, 1.0 / np.sqrt(d), d),
        "embed.w1": rng.normal(0.0, 1.0 / np.sqrt(3 * d), (3 * d, d)),
        "embed.b1": np.zeros(d),
        "embed.w2": rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
        "embed.b2": np.zeros(d),
    }


def encode_spans(doc: Document, token_matrix: np.ndarray, p: dict[str, T.Var],
                 tape: T.Tape) -> T.Var:
    """Span encodings x_enc, one row per candidate mention (M x d).

    Each span is [first token; last token; query-pooled tokens], squeezed
    through a tanh FFN (3d -> d -> d) and shifted by the sinusoidal encoding
    of its left offset.
    """
    d = p["embed.b1"].value.shape[0]
    m = len(doc.mentions)
    if m == 0:
        return tape.const(np.zeros((0, d)))
    lefts = np.array([x.left for x in doc.mentions])
    rights = np.array([x.right for x in doc.mentions])
    toks = tape.const(token_matrix)
    first = tape.const(token_matrix[lefts])
    last = tape.const(token_matrix[rights])

    pos = np.arange(token_matrix.shape[0])
    inside = (pos[None, :] >= lefts[:, None]) & (pos[None, :] <= rights[:, None])
    scores = T.matmul(toks, p["embed.query"])            # (N,)
    weights = T.softmax(T.broadcast_rows(scores, m), mask=inside)   # (M, N)
    pooled = T.matmul(weights, toks)                      # (M, d)

    h = T.concat([first, last, pooled], axis=1)
    h = T.tanh(T.matmul(h, p["embed.w1"]) + p["embed.b1"])
    h = T.tanh(T.matmul(h, p["embed.w2"]) + p["embed.b2"])
    return h + positional_table(lefts, d)


def span_encoding(doc: Document, cfg: EmbedderConfig, params: dict[str, np.ndarray]) -> np.ndarray:
    """Plain-array x_enc for inference."""
    tape = T.Tape(enabled=False)
    p = {k: tape.const(v) for k, v in params.items() if k.startswith("embed.")}
    return encode_spans(doc, embed_tokens(doc, cfg), p, tape).value
