"""Uniform batch-encoding layer over the embedding backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .embed import (
    WO_AWARE,
    WO_INVARIANT,
    EmbeddingSpace,
    PMeanConfig,
    PrecomputedStore,
    SentenceVector,
    SifConfig,
    embed_bow,
    embed_pair,
    embed_pmean,
    embed_remote,
    embed_sif_batch,
)
from .errors import ConfigError, UnknownSpace
from .lexicon import tokenize

WORD_VECTOR_KINDS = ("bow", "sif", "pmean")
ALL_KINDS = WORD_VECTOR_KINDS + ("precomputed", "remote")


@dataclass
class EmbedderSpec:
    """Declarative description of one sentence-embedding model variant."""

    name: str
    kind: str
    family: str = ""
    space: str = ""  # bow / sif
    spaces: tuple[str, ...] = ()  # pmean
    max_power: int = 3
    sif_alpha: float = 0.0003
    sif_remove_pc: bool = False
    sif_freq_path: str = ""  # external frequency table; empty = dataset train split
    store_path: str = ""  # precomputed
    endpoint: str = ""  # remote
    model: str = ""  # remote / precomputed model name

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"embedder:{self.name}.kind", f"unknown kind {self.kind!r}")
        if self.kind in WORD_VECTOR_KINDS:
            if self.family and self.family != WO_INVARIANT:
                raise ConfigError(f"embedder:{self.name}.family", f"{self.kind} embedders are word-order invariant")
            self.family = WO_INVARIANT
        elif not self.family:
            self.family = WO_AWARE
        if self.family not in (WO_INVARIANT, WO_AWARE):
            raise ConfigError(f"embedder:{self.name}.family", f"unknown family {self.family!r}")


class Encoder:
    """Turns a batch of (possibly pair) examples into a feature matrix."""

    def __init__(self, name: str, family: str):
        self.name = name
        self.family = family

    def encode_batch(
        self, texts_batch: Sequence[tuple[str, ...]], ids: Sequence[str], condition: str
    ) -> np.ndarray:
        raise NotImplementedError


def _compose(per_example: list[list[SentenceVector]]) -> np.ndarray:
    rows = []
    for vecs in per_example:
        if len(vecs) == 1:
            rows.append(vecs[0].values)
        else:
            rows.append(embed_pair(vecs[0], vecs[1]).values)
    return np.stack(rows) if rows else np.zeros((0, 0))


class WordVectorEncoder(Encoder):
    def __init__(
        self,
        spec: EmbedderSpec,
        spaces: Mapping[str, EmbeddingSpace],
        freq_table: Mapping[str, float] | None = None,
    ):
        super().__init__(spec.name, spec.family)
        self.spec = spec
        self.spaces = spaces
        if spec.kind in ("bow", "sif"):
            if spec.space not in spaces:
                raise UnknownSpace(spec.space)
            self.space = spaces[spec.space]
        if spec.kind == "sif":
            self.sif_cfg = SifConfig(
                alpha=spec.sif_alpha, freq_table=freq_table or {}, remove_pc=spec.sif_remove_pc
            )
        if spec.kind == "pmean":
            self.pmean_cfg = PMeanConfig(spaces=spec.spaces, max_power=spec.max_power)

    def encode_batch(self, texts_batch, ids=None, condition="baseline") -> np.ndarray:
        token_seqs = []
        arity = None
        for texts in texts_batch:
            arity = len(texts)
            for text in texts:
                token_seqs.append(tokenize(text))
        if self.spec.kind == "bow":
            flat = [embed_bow(toks, self.space) for toks in token_seqs]
        elif self.spec.kind == "sif":
            flat = embed_sif_batch(token_seqs, self.space, self.sif_cfg)
        else:
            flat = [embed_pmean(toks, self.pmean_cfg, self.spaces) for toks in token_seqs]
        per_example = [flat[i : i + arity] for i in range(0, len(flat), arity)] if flat else []
        return _compose(per_example)


class PrecomputedEncoder(Encoder):
    """Serves stored per-example vectors; pair composition happened upstream."""

    def __init__(self, spec: EmbedderSpec):
        super().__init__(spec.name, spec.family)
        self.store = PrecomputedStore(spec.store_path, model=spec.model or None)

    def encode_batch(self, texts_batch, ids, condition="baseline") -> np.ndarray:
        rows = [self.store.lookup(ex_id, condition).values for ex_id in ids]
        return np.stack(rows) if rows else np.zeros((0, 0))


class RemoteEncoder(Encoder):
    def __init__(self, spec: EmbedderSpec, endpoint_override: str = "", batch_size: int = 64):
        super().__init__(spec.name, spec.family)
        self.endpoint = endpoint_override or spec.endpoint
        if not self.endpoint:
            raise ConfigError(f"embedder:{spec.name}.endpoint", "remote embedder needs an endpoint")
        self.model = spec.model or spec.name
        self.batch_size = batch_size

    def encode_batch(self, texts_batch, ids=None, condition="baseline") -> np.ndarray:
        flat: list[str] = []
        arity = None
        for texts in texts_batch:
            arity = len(texts)
            flat.extend(texts)
        vecs: list[SentenceVector] = []
        for start in range(0, len(flat), self.batch_size):
            vecs.extend(embed_remote(flat[start : start + self.batch_size], self.endpoint, self.model))
        per_example = [vecs[i : i + arity] for i in range(0, len(vecs), arity)] if vecs else []
        return _compose(per_example)


def make_encoder(
    spec: EmbedderSpec,
    spaces: Mapping[str, EmbeddingSpace] | None = None,
    freq_table: Mapping[str, float] | None = None,
    endpoint_override: str = "",
) -> Encoder:
    if spec.kind in WORD_VECTOR_KINDS:
        return WordVectorEncoder(spec, spaces or {}, freq_table)
    if spec.kind == "precomputed":
        return PrecomputedEncoder(spec)
    return RemoteEncoder(spec, endpoint_override=endpoint_override)
