"""Shared fixtures: lexicons, vector spaces, and corpus builders."""

import random

import numpy as np
import pytest

from connprobe.embed import EmbeddingSpace
from connprobe.lexicon import default_lexicon_path, load_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(default_lexicon_path())


def make_space(words, dim=8, seed=0, name="toy"):
    rng = np.random.default_rng(seed)
    vectors = {w: rng.normal(size=dim) for w in sorted(words)}
    return EmbeddingSpace(name=name, dim=dim, vectors=vectors)


@pytest.fixture
def space_factory():
    return make_space


FILLERS = [
    "cat",
    "dog",
    "teacher",
    "friend",
    "lamp",
    "garden",
    "river",
    "song",
    "ran",
    "slept",
    "cooked",
    "smiled",
    "waited",
    "jumped",
    "read",
    "sang",
    "the",
    "a",
    "my",
    "her",
    "his",
    "our",
    "big",
    "small",
    "red",
    "quiet",
]


def make_sentence(rng: random.Random, connective: str) -> str:
    """Two filler clauses joined by exactly one connective."""
    def clause():
        det = rng.choice(["the", "a", "my", "her"])
        noun = rng.choice(["cat", "dog", "teacher", "friend", "garden", "river"])
        verb = rng.choice(["ran", "slept", "cooked", "smiled", "waited", "jumped"])
        return f"{det} {noun} {verb}"

    left = clause()
    return f"{left[0].upper()}{left[1:]} {connective} {clause()}."


def write_glove(path, words, dim=8, seed=0):
    rng = random.Random(seed)
    lines = []
    for w in sorted(set(words)):
        vals = " ".join(f"{rng.uniform(-1, 1):.6f}" for _ in range(dim))
        lines.append(f"{w} {vals}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def glove_writer():
    return write_glove
