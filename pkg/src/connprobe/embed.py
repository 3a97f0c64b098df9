"""Word-vector spaces and sentence encoders (averaging family, stores, remote client)."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import requests

from .errors import (
    ContractViolation,
    DimensionMismatch,
    EmptyFile,
    MissingEmbedding,
    ServiceUnavailable,
    UnknownSpace,
    UnparseableFloat,
)
from .lexicon import Token

log = logging.getLogger(__name__)

WO_INVARIANT = "wo_invariant"
WO_AWARE = "wo_aware"


@dataclass
class EmbeddingSpace:
    name: str
    dim: int
    vectors: Mapping[str, np.ndarray]

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[word]


@dataclass
class SifConfig:
    alpha: float = 0.0003
    freq_table: Mapping[str, float] = field(default_factory=dict)
    remove_pc: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass
class PMeanConfig:
    spaces: tuple[str, ...]
    max_power: int = 3

    def __post_init__(self):
        if not 1 <= self.max_power <= 3:
            raise ValueError(f"max_power must be 1, 2, or 3, got {self.max_power}")
        if not self.spaces:
            raise ValueError("pmean needs at least one space")


@dataclass
class SentenceVector:
    values: np.ndarray
    dim: int
    oov_count: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.dim,):
            raise DimensionMismatch(f"vector shape {self.values.shape} != ({self.dim},)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sentence vector has non-finite entries")


def load_vectors(path, format: str = "glove_text") -> EmbeddingSpace:
    """Load a text-format word-vector file.

    glove_text rows are `word v1 ... vd`; fasttext_vec additionally starts
    with a `count dim` header. The dimension comes from the first data row
    (glove) or the header (fasttext); duplicated words keep their first
    vector and are counted in a warning.
    """
    if format not in ("glove_text", "fasttext_vec"):
        raise ValueError(f"unknown vector format {format!r}")
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        lines = iter(enumerate(fh, start=1))
        if format == "fasttext_vec":
            try:
                lineno, header = next(lines)
            except StopIteration:
                raise EmptyFile(f"{path} is empty") from None
            parts = header.split()
            if len(parts) != 2:
                raise UnparseableFloat(1)
            try:
                dim = int(parts[1])
            except ValueError:
                raise UnparseableFloat(1) from None
        for lineno, line in lines:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            word = parts[0]
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DimensionMismatch(f"row {lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise UnparseableFloat(lineno) from None
            if word in vectors:
                duplicates += 1
                continue
            vectors[word] = vec
    if not vectors:
        raise EmptyFile(f"no vectors in {path}")
    if duplicates:
        log.warning("%s: %d duplicate words kept first occurrence", path, duplicates)
    return EmbeddingSpace(name=path.stem, dim=dim, vectors=vectors)


def _norms(tokens: Sequence) -> list[str]:
    return [t.norm if isinstance(t, Token) else str(t).lower() for t in tokens]


def _stack_in_vocab(tokens: Sequence, space: EmbeddingSpace) -> tuple[list[str], int]:
    """In-vocabulary norms in canonical (sorted) order plus the OOV count.

    Sorting fixes the accumulation order so any permutation of the input
    produces a bitwise-identical average.
    """
    norms = _norms(tokens)
    in_vocab = sorted(n for n in norms if n in space)
    return in_vocab, len(norms) - len(in_vocab)


def embed_bow(tokens: Sequence, space: EmbeddingSpace) -> SentenceVector:
    """Arithmetic mean of in-vocabulary word vectors; all-OOV gives zeros."""
    in_vocab, oov = _stack_in_vocab(tokens, space)
    if not in_vocab:
        return SentenceVector(np.zeros(space.dim), space.dim, oov)
    mat = np.stack([space[w] for w in in_vocab])
    return SentenceVector(mat.mean(axis=0), space.dim, oov)


def sif_weight(alpha: float, p_w: float) -> float:
    """Frequency-discounting weight alpha / (alpha + p(w))."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 0.0 <= p_w <= 1.0:
        raise ValueError(f"relative frequency must be in [0, 1], got {p_w}")
    return alpha / (alpha + p_w)


def embed_sif(tokens: Sequence, space: EmbeddingSpace, cfg: SifConfig) -> SentenceVector:
    """Frequency-weighted average. Words missing from the table get weight 1.

    Principal-component removal is a batch operation; see embed_sif_batch.
    """
    in_vocab, oov = _stack_in_vocab(tokens, space)
    if not in_vocab:
        return SentenceVector(np.zeros(space.dim), space.dim, oov)
    weights = np.array([sif_weight(cfg.alpha, cfg.freq_table.get(w, 0.0)) for w in in_vocab])
    mat = np.stack([space[w] for w in in_vocab])
    return SentenceVector((weights[:, None] * mat).mean(axis=0), space.dim, oov)


def remove_first_pc(matrix: np.ndarray) -> np.ndarray:
    """Subtract each row's projection onto the batch's first principal direction."""
    if matrix.shape[0] < 2 or not np.any(matrix):
        return matrix
    _, _, vt = np.linalg.svd(matrix, full_matrices=False)
    pc = vt[0]
    return matrix - np.outer(matrix @ pc, pc)


def embed_sif_batch(
    token_seqs: Sequence[Sequence], space: EmbeddingSpace, cfg: SifConfig
) -> list[SentenceVector]:
    vecs = [embed_sif(tokens, space, cfg) for tokens in token_seqs]
    if not cfg.remove_pc or not vecs:
        return vecs
    matrix = remove_first_pc(np.stack([v.values for v in vecs]))
    return [SentenceVector(matrix[i], space.dim, v.oov_count) for i, v in enumerate(vecs)]


def power_mean(values: Sequence[float], p: int) -> float:
    """Generalized mean of order p, kept real via signed roots for odd p."""
    if p < 1:
        raise ValueError(f"power must be >= 1, got {p}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("power_mean needs at least one value")
    if p == 1:
        return float(arr.mean())
    if p % 2 == 0:
        m = np.mean(arr**p)
        return float(m ** (1.0 / p))
    m = np.mean(np.sign(arr) * np.abs(arr) ** p)
    return float(np.sign(m) * np.abs(m) ** (1.0 / p))


def _pmean_block(mat: np.ndarray, p: int) -> np.ndarray:
    if p == 1:
        return mat.mean(axis=0)
    if p % 2 == 0:
        return np.mean(mat**p, axis=0) ** (1.0 / p)
    m = np.mean(np.sign(mat) * np.abs(mat) ** p, axis=0)
    return np.sign(m) * np.abs(m) ** (1.0 / p)


def embed_pmean(
    tokens: Sequence, cfg: PMeanConfig, spaces: Mapping[str, EmbeddingSpace]
) -> SentenceVector:
    """Concatenated elementwise power means, spaces outer, powers 1..k inner."""
    blocks = []
    oov_total = 0
    out_dim = 0
    for name in cfg.spaces:
        if name not in spaces:
            raise UnknownSpace(name)
        space = spaces[name]
        out_dim += cfg.max_power * space.dim
        in_vocab, oov = _stack_in_vocab(tokens, space)
        oov_total += oov
        if in_vocab:
            mat = np.stack([space[w] for w in in_vocab])
            for p in range(1, cfg.max_power + 1):
                blocks.append(_pmean_block(mat, p))
        else:
            blocks.append(np.zeros(cfg.max_power * space.dim))
    return SentenceVector(np.concatenate(blocks), out_dim, oov_total)


def embed_pair(u: SentenceVector, v: SentenceVector) -> SentenceVector:
    """Standard pair composition [u; v; |u-v|; u*v] of dimension 4d."""
    if u.dim != v.dim:
        raise DimensionMismatch(f"pair dims differ: {u.dim} vs {v.dim}")
    a, b = u.values, v.values
    return SentenceVector(
        np.concatenate([a, b, np.abs(a - b), a * b]), 4 * u.dim, u.oov_count + v.oov_count
    )


# --- precomputed store ---

class PrecomputedStore:
    """JSON-lines vector store keyed by (example id, condition)."""

    def __init__(self, path, model: str | None = None):
        self.path = Path(path)
        self.model = model
        self.dim: int | None = None
        self._vectors: dict[tuple[str, str], np.ndarray] = {}
        self._load()

    def _load(self):
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if self.model is not None and obj.get("model") != self.model:
                    continue
                key = (str(obj["id"]), str(obj["condition"]))
                vec = np.asarray(obj["vector"], dtype=np.float64)
                if self.dim is None:
                    self.dim = vec.shape[0]
                elif vec.shape[0] != self.dim:
                    raise DimensionMismatch(f"{self.path}:{lineno}: dim {vec.shape[0]} != {self.dim}")
                if key in self._vectors:
                    log.warning("%s:%d duplicate key %s, keeping first", self.path, lineno, key)
                    continue
                self._vectors[key] = vec
        if self.dim is None:
            raise EmptyFile(f"no embeddings for model={self.model!r} in {self.path}")

    def lookup(self, example_id: str, condition: str) -> SentenceVector:
        key = (example_id, condition)
        if key not in self._vectors:
            raise MissingEmbedding(example_id, condition)
        return SentenceVector(self._vectors[key], self.dim, 0)

    def __len__(self) -> int:
        return len(self._vectors)


def lookup_precomputed(example_id: str, store: PrecomputedStore, condition: str = "baseline") -> SentenceVector:
    return store.lookup(example_id, condition)


def write_store(path, records) -> None:
    """Append-style writer for precomputed stores; records are (id, condition, model, vector)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, condition, model, vector in records:
            obj = {"id": ex_id, "condition": condition, "model": model, "vector": [float(x) for x in vector]}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


# --- remote client ---

def embed_remote(
    texts: Sequence[str],
    endpoint: str,
    model: str,
    timeout: float = 30.0,
    max_attempts: int = 3,
    session: requests.Session | None = None,
) -> list[SentenceVector]:
    """POST a batch to the embedding service, preserving order.

    Retries connection failures and 5xx responses with doubling backoff;
    a response whose count or dimensions disagree with the request is a
    ContractViolation.
    """
    if not texts:
        return []
    url = endpoint.rstrip("/") + "/embed"
    post = (session or requests).post
    last_err = None
    for attempt in range(max_attempts):
        if attempt:
            time.sleep(0.2 * 2 ** (attempt - 1))
        try:
            resp = post(url, json={"model": model, "texts": list(texts)}, timeout=timeout)
        except requests.RequestException as exc:
            last_err = exc
            continue
        if resp.status_code >= 500:
            last_err = ServiceUnavailable(f"{url} returned {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise ServiceUnavailable(f"{url} returned {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        return _validate_remote(payload, len(texts))
    raise ServiceUnavailable(f"{url} unreachable after {max_attempts} attempts: {last_err}")


def _validate_remote(payload, expected: int) -> list[SentenceVector]:
    try:
        dim = int(payload["dim"])
        embeddings = payload["embeddings"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractViolation(f"malformed response: {exc}") from None
    if len(embeddings) != expected:
        raise ContractViolation(f"sent {expected} texts, got {len(embeddings)} vectors")
    out = []
    for i, emb in enumerate(embeddings):
        vec = np.asarray(emb, dtype=np.float64)
        if vec.shape != (dim,):
            raise ContractViolation(f"vector {i} has shape {vec.shape}, declared dim {dim}")
        if not np.all(np.isfinite(vec)):
            raise ContractViolation(f"vector {i} has non-finite entries")
        out.append(SentenceVector(vec, dim, 0))
    return out


def check_remote_health(endpoint: str, timeout: float = 10.0) -> dict:
    try:
        resp = requests.get(endpoint.rstrip("/") + "/health", timeout=timeout)
    except requests.RequestException as exc:
        raise ServiceUnavailable(str(exc)) from None
    if resp.status_code != 200:
        raise ServiceUnavailable(f"/health returned {resp.status_code}")
    return resp.json()
