"""Model container: ontology, configuration and the flat parameter table."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import tape as T
from .core import Ontology
from .embed import EmbedderConfig, init_embedder_params
from .engine import init_gru_params
from .policy import independent_policy, init_policy_params, joint_policy

HEADS = ("independent", "joint")


@dataclass(frozen=True)
class ModelConfig:
    d: int = 32
    layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    head: str = "joint"
    seed: int = 0

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.d % 2 or self.d % self.heads:
            raise ValueError("d must be even and divisible by the number of heads")


@dataclass
class Model:
    ontology: Ontology
    config: ModelConfig
    embedder: EmbedderConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initialize(cls, ontology: Ontology, config: ModelConfig | None = None,
                   embed_seed: int | None = None) -> "Model":
        config = config or ModelConfig()
        rng = np.random.default_rng(config.seed)
        emb = EmbedderConfig(d=config.d, seed=config.seed if embed_seed is None else embed_seed)
        params = {}
        params.update(init_embedder_params(emb, rng))
        params.update(init_policy_params(ontology, config.d, config.layers, config.heads,
                                         rng, config.ff_mult))
        params.update(init_gru_params(config.d, rng))
        return cls(ontology, config, emb, params)

    def bind(self, tape: T.Tape) -> dict[str, T.Var]:
        """Wrap every parameter as a tape leaf (or a constant on a disabled tape)."""
        if tape.enabled:
            return {k: tape.var(v) for k, v in self.params.items()}
        return {k: tape.const(v) for k, v in self.params.items()}

    def policy(self, X: T.Var, type_name: str, p: dict[str, T.Var], head: str | None = None):
        head = head or self.config.head
        if head == "independent":
            return independent_policy(X, type_name, p, self.ontology)
        if head == "joint":
            return joint_policy(X, type_name, p, self.ontology,
                                self.config.layers, self.config.heads)
        raise ValueError(f"unknown policy head {head!r}")

    @property
    def slot_vocabulary(self) -> tuple[str, ...]:
        return self.ontology.slot_vocabulary

    @property
    def null_index(self) -> int:
        return len(self.ontology.slot_vocabulary) - 1

    def copy(self) -> "Model":
        return Model(self.ontology, self.config, self.embedder,
                     {k: v.copy() for k, v in self.params.items()})

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def config_json(self) -> dict:
        return asdict(self.config)
