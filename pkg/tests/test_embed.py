"""Vector loading, the averaging encoders, stores, and the remote client."""

import json
import math
import random

import numpy as np
import pytest

import connprobe.embed as embed_mod
from connprobe.embed import (
    EmbeddingSpace,
    PMeanConfig,
    PrecomputedStore,
    SifConfig,
    embed_bow,
    embed_pair,
    embed_pmean,
    embed_remote,
    embed_sif,
    embed_sif_batch,
    load_vectors,
    power_mean,
    sif_weight,
    write_store,
)
from connprobe.errors import (
    ContractViolation,
    DimensionMismatch,
    EmptyFile,
    MissingEmbedding,
    ServiceUnavailable,
    UnknownSpace,
    UnparseableFloat,
)
from tests.conftest import make_space


# --- loading ---


def test_load_glove_two_lines(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("cat 1.0 0.0 2.0\ndog 0.5 1.5 -1.0\n")
    space = load_vectors(p, "glove_text")
    assert space.dim == 3
    assert len(space.vectors) == 2
    assert np.array_equal(space["dog"], [0.5, 1.5, -1.0])


def test_load_fasttext_equivalent(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("cat 1.0 0.0 2.0\ndog 0.5 1.5 -1.0\n")
    f = tmp_path / "f.vec"
    f.write_text("2 3\ncat 1.0 0.0 2.0\ndog 0.5 1.5 -1.0\n")
    gs, fs = load_vectors(g, "glove_text"), load_vectors(f, "fasttext_vec")
    assert gs.dim == fs.dim == 3
    assert all(np.array_equal(gs[w], fs[w]) for w in ("cat", "dog"))


def test_load_dimension_mismatch(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("cat 1 2 3\ndog 1 2 3 4\n")
    with pytest.raises(DimensionMismatch):
        load_vectors(p)


def test_load_unparseable_float(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("cat 1 2 x\n")
    with pytest.raises(UnparseableFloat):
        load_vectors(p)


def test_load_empty(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("")
    with pytest.raises(EmptyFile):
        load_vectors(p)


def test_load_duplicates_keep_first(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("cat 1 1\ncat 9 9\n")
    space = load_vectors(p)
    assert np.array_equal(space["cat"], [1.0, 1.0])


# --- BOW ---


def test_bow_mean_of_two():
    space = EmbeddingSpace("s", 2, {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})
    out = embed_bow(["a", "b"], space)
    assert np.array_equal(out.values, [0.5, 0.5])
    assert out.oov_count == 0


def test_bow_permutation_bitwise():
    space = make_space([f"w{i}" for i in range(12)], dim=6, seed=1)
    rng = random.Random(5)
    tokens = [f"w{rng.randrange(12)}" for _ in range(30)] + ["zzz-oov"]
    base = embed_bow(tokens, space).values
    for _ in range(10):
        rng.shuffle(tokens)
        assert np.array_equal(embed_bow(tokens, space).values, base)


def test_bow_all_oov():
    space = make_space(["a"], dim=4)
    out = embed_bow(["x", "y"], space)
    assert np.array_equal(out.values, np.zeros(4))
    assert out.oov_count == 2


# --- SIF ---


def test_sif_weight_values():
    assert sif_weight(0.1, 0.1) == 0.5
    assert sif_weight(0.1, 0.0) == 1.0
    assert abs(sif_weight(0.0003, 0.0027) - 0.1) < 1e-12


def test_sif_single_token_half_weight():
    space = EmbeddingSpace("s", 2, {"w": np.array([2.0, 0.0])})
    cfg = SifConfig(alpha=0.5, freq_table={"w": 0.5})  # weight = 0.5/(0.5+0.5) = 0.5
    out = embed_sif(["w"], space, cfg)
    assert np.allclose(out.values, [1.0, 0.0])


def test_sif_huge_alpha_matches_bow():
    space = make_space([f"w{i}" for i in range(9)], dim=5, seed=2)
    freq = {f"w{i}": 1.0 / 9 for i in range(9)}
    tokens = ["w0", "w3", "w3", "w7", "w8"]
    sif = embed_sif(tokens, space, SifConfig(alpha=1e6, freq_table=freq)).values
    bow = embed_bow(tokens, space).values
    cos = float(sif @ bow / (np.linalg.norm(sif) * np.linalg.norm(bow)))
    assert cos > 0.999


def test_sif_equal_weights_parallel_to_bow():
    space = make_space(["a", "b", "c"], dim=4, seed=3)
    cfg = SifConfig(alpha=0.2, freq_table={"a": 0.3, "b": 0.3, "c": 0.3})
    sif = embed_sif(["a", "b", "c"], space, cfg).values
    bow = embed_bow(["a", "b", "c"], space).values
    ratio = sif / bow
    assert np.allclose(ratio, ratio[0])


def test_sif_batch_pc_removal_kills_rank_one():
    space = EmbeddingSpace("s", 3, {"a": np.array([1.0, 2.0, 3.0])})
    cfg = SifConfig(alpha=0.1, freq_table={}, remove_pc=True)
    vecs = embed_sif_batch([["a"], ["a", "a"]], space, cfg)
    # both sentences embed onto the same direction, so PC removal zeroes them
    for v in vecs:
        assert np.allclose(v.values, 0.0, atol=1e-12)


# --- power means ---


def test_power_mean_values():
    assert power_mean([3, 4], 1) == pytest.approx(3.5)
    assert power_mean([3, 4], 2) == pytest.approx(math.sqrt(12.5), abs=1e-4)
    assert power_mean([-1, -1], 3) == pytest.approx(-1.0)


def test_pmean_k1_equals_bow():
    space = make_space([f"w{i}" for i in range(8)], dim=7, seed=4)
    tokens = ["w1", "w5", "w5", "w2"]
    pm = embed_pmean(tokens, PMeanConfig(spaces=("toy",), max_power=1), {"toy": space})
    bow = embed_bow(tokens, space)
    assert np.max(np.abs(pm.values - bow.values)) < 1e-9


def test_pmean_dimension():
    s1 = make_space(["a", "b"], dim=3, seed=0, name="s1")
    s2 = make_space(["a", "b"], dim=3, seed=1, name="s2")
    out = embed_pmean(["a", "b"], PMeanConfig(spaces=("s1", "s2"), max_power=3), {"s1": s1, "s2": s2})
    assert out.dim == 18
    assert out.values.shape == (18,)


def test_pmean_permutation_bitwise():
    space = make_space([f"w{i}" for i in range(10)], dim=4, seed=6)
    rng = random.Random(8)
    tokens = [f"w{rng.randrange(10)}" for _ in range(20)]
    cfg = PMeanConfig(spaces=("toy",), max_power=3)
    base = embed_pmean(tokens, cfg, {"toy": space}).values
    for _ in range(10):
        rng.shuffle(tokens)
        assert np.array_equal(embed_pmean(tokens, cfg, {"toy": space}).values, base)


def test_pmean_unknown_space():
    with pytest.raises(UnknownSpace):
        embed_pmean(["a"], PMeanConfig(spaces=("nope",), max_power=1), {})


def test_pmean_ordering_nonnegative():
    rng = np.random.default_rng(11)
    space = EmbeddingSpace("p", 5, {f"w{i}": rng.uniform(0.0, 2.0, size=5) for i in range(6)})
    tokens = ["w0", "w2", "w3", "w5"]
    out = embed_pmean(tokens, PMeanConfig(spaces=("p",), max_power=3), {"p": space})
    m1, m2, m3 = out.values[:5], out.values[5:10], out.values[10:15]
    assert np.all(m1 <= m2 + 1e-12)
    assert np.all(m2 <= m3 + 1e-12)


def test_bow_sif_homogeneity():
    space = make_space(["a", "b", "c"], dim=4, seed=9)
    scaled = EmbeddingSpace("s2", 4, {w: 3.0 * v for w, v in space.vectors.items()})
    tokens = ["a", "c", "c"]
    assert np.allclose(3.0 * embed_bow(tokens, space).values, embed_bow(tokens, scaled).values)
    cfg = SifConfig(alpha=0.3, freq_table={"a": 0.1, "c": 0.4})
    assert np.allclose(3.0 * embed_sif(tokens, space, cfg).values, embed_sif(tokens, scaled, cfg).values)


# --- pair composition ---


def test_pair_identity_case():
    u = embed_bow(["a"], EmbeddingSpace("s", 2, {"a": np.array([1.0, 2.0])}))
    out = embed_pair(u, u)
    assert out.dim == 8
    assert np.array_equal(out.values[4:6], [0.0, 0.0])


def test_pair_hand_values():
    s = EmbeddingSpace("s", 2, {"u": np.array([1.0, 2.0]), "v": np.array([3.0, -1.0])})
    out = embed_pair(embed_bow(["u"], s), embed_bow(["v"], s))
    assert np.array_equal(out.values, [1, 2, 3, -1, 2, 3, 3, -2])


def test_pair_dimension_mismatch():
    a = embed_bow(["a"], EmbeddingSpace("s", 2, {"a": np.array([1.0, 2.0])}))
    b = embed_bow(["b"], EmbeddingSpace("t", 3, {"b": np.array([1.0, 2.0, 3.0])}))
    with pytest.raises(DimensionMismatch):
        embed_pair(a, b)


# --- precomputed store ---


def test_store_round_trip(tmp_path):
    p = tmp_path / "store.jsonl"
    write_store(
        p,
        [
            ("mr-7", "baseline", "bert", [1.0, 2.0]),
            ("mr-7", "omit:any", "bert", [3.0, 4.0]),
            ("mr-8", "baseline", "bert", [5.0, 6.0]),
        ],
    )
    store = PrecomputedStore(p)
    assert np.array_equal(store.lookup("mr-7", "baseline").values, [1.0, 2.0])
    assert np.array_equal(store.lookup("mr-7", "omit:any").values, [3.0, 4.0])
    with pytest.raises(MissingEmbedding):
        store.lookup("mr-9", "baseline")


def test_store_duplicate_keeps_first_and_dim_checked(tmp_path):
    p = tmp_path / "store.jsonl"
    lines = [
        json.dumps({"id": "a", "condition": "baseline", "model": "m", "vector": [1.0, 1.0]}),
        json.dumps({"id": "a", "condition": "baseline", "model": "m", "vector": [9.0, 9.0]}),
    ]
    p.write_text("\n".join(lines) + "\n")
    store = PrecomputedStore(p)
    assert np.array_equal(store.lookup("a", "baseline").values, [1.0, 1.0])
    p2 = tmp_path / "bad.jsonl"
    p2.write_text(
        json.dumps({"id": "a", "condition": "baseline", "model": "m", "vector": [1.0]})
        + "\n"
        + json.dumps({"id": "b", "condition": "baseline", "model": "m", "vector": [1.0, 2.0]})
        + "\n"
    )
    with pytest.raises(DimensionMismatch):
        PrecomputedStore(p2)


def test_store_empty(tmp_path):
    p = tmp_path / "store.jsonl"
    p.write_text("")
    with pytest.raises(EmptyFile):
        PrecomputedStore(p)


# --- remote client ---


class _Response:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = json.dumps(payload)

    def json(self):
        return self._payload


class _Session:
    """Scripted session: pops one canned response (or exception) per call."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, timeout=None):
        self.calls.append(json)
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def test_remote_empty_batch_short_circuits():
    session = _Session([])  # any call would raise IndexError
    assert embed_remote([], "http://x", "m", session=session) == []
    assert session.calls == []


def test_remote_order_and_dim():
    payload = {"dim": 2, "embeddings": [[1.0, 2.0], [3.0, 4.0]]}
    session = _Session([_Response(200, payload)])
    out = embed_remote(["a", "b"], "http://x", "m", session=session)
    assert [list(v.values) for v in out] == [[1.0, 2.0], [3.0, 4.0]]
    assert session.calls[0] == {"model": "m", "texts": ["a", "b"]}


def test_remote_count_mismatch():
    payload = {"dim": 2, "embeddings": [[1.0, 2.0]]}
    session = _Session([_Response(200, payload)])
    with pytest.raises(ContractViolation):
        embed_remote(["a", "b"], "http://x", "m", session=session)


def test_remote_retries_then_succeeds(monkeypatch):
    sleeps = []
    monkeypatch.setattr(embed_mod.time, "sleep", sleeps.append)
    payload = {"dim": 1, "embeddings": [[7.0]]}
    session = _Session([_Response(503, {}), _Response(500, {}), _Response(200, payload)])
    out = embed_remote(["a"], "http://x", "m", session=session, max_attempts=3)
    assert list(out[0].values) == [7.0]
    assert sleeps == [0.2, 0.4]


def test_remote_gives_up(monkeypatch):
    monkeypatch.setattr(embed_mod.time, "sleep", lambda _s: None)
    session = _Session([_Response(500, {})] * 3)
    with pytest.raises(ServiceUnavailable):
        embed_remote(["a"], "http://x", "m", session=session, max_attempts=3)


def test_remote_client_error_no_retry():
    session = _Session([_Response(404, {"detail": "unknown model"})])
    with pytest.raises(ServiceUnavailable):
        embed_remote(["a"], "http://x", "m", session=session)
    assert session.script == []  # consumed exactly one response
