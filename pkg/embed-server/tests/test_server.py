"""Tests for the embedding service: pooling, routing, and wire conformance."""

import json
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import requests

from embed_server.server import (
    EmbedServer,
    ServedModel,
    build_parser,
    demo_model,
    hash_encoder,
    parse_models,
    pool_tokens,
    serve,
)


@pytest.fixture(scope="module")
def server():
    models = [demo_model("toy-mean", 6), demo_model("toy-first", 4, pooling="first")]
    with serve(models) as srv:
        yield srv


def post_embed(server, payload):
    return requests.post(server.endpoint + "/embed", json=payload, timeout=10)


# ---------------------------------------------------------------- pooling


def test_mean_pooling_averages_rows():
    pooled = pool_tokens(np.array([[1.0, 0.0], [0.0, 1.0]]), "mean")
    assert np.array_equal(pooled, np.array([0.5, 0.5]))


def test_first_pooling_returns_first_row_unchanged():
    mat = np.array([[3.0, -1.0, 2.0], [9.0, 9.0, 9.0]])
    assert np.array_equal(pool_tokens(mat, "first"), mat[0])


def test_single_token_identical_under_both_rules():
    mat = np.array([[0.25, -4.0, 1.5]])
    assert np.array_equal(pool_tokens(mat, "mean"), pool_tokens(mat, "first"))


def test_unknown_pooling_rule_rejected():
    with pytest.raises(ValueError):
        pool_tokens(np.ones((2, 2)), "max")


def test_empty_token_matrix_rejected():
    with pytest.raises(ValueError):
        pool_tokens(np.empty((0, 3)), "mean")


# ----------------------------------------------------------- hash encoder


def test_hash_encoder_is_deterministic_per_token():
    enc = hash_encoder("m", 8)
    a = enc("alpha beta")
    b = enc("alpha beta")
    assert a.shape == (2, 8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[0], a[1])


def test_hash_encoder_depends_on_model_name():
    a = hash_encoder("m1", 8)("alpha")
    b = hash_encoder("m2", 8)("alpha")
    assert not np.array_equal(a, b)


def test_hash_encoder_handles_empty_text():
    mat = hash_encoder("m", 5)("")
    assert mat.shape == (1, 5)


def test_repeated_token_repeats_row():
    mat = hash_encoder("m", 6)("echo echo")
    assert np.array_equal(mat[0], mat[1])


# ------------------------------------------------------------ ServedModel


def test_encode_batch_shape_and_determinism():
    model = demo_model("m", 7)
    out = model.encode_batch(["one two", "three"])
    assert out.shape == (2, 7)
    assert np.array_equal(out, model.encode_batch(["one two", "three"]))


def test_mean_pooling_matches_token_average():
    model = demo_model("m", 5)
    tokens = hash_encoder("m", 5)("a b c")
    assert np.allclose(model.encode_batch(["a b c"])[0], tokens.mean(axis=0))


def test_first_pooling_matches_first_token():
    model = demo_model("m", 5, pooling="first")
    tokens = hash_encoder("m", 5)("a b c")
    assert np.array_equal(model.encode_batch(["a b c"])[0], tokens[0])


def test_model_without_encoder_is_not_ready():
    model = ServedModel("stub", 4)
    assert not model.ready
    with pytest.raises(RuntimeError):
        model.encode_batch(["x"])


def test_model_validation():
    with pytest.raises(ValueError):
        ServedModel("", 4)
    with pytest.raises(ValueError):
        ServedModel("m", 0)
    with pytest.raises(ValueError):
        ServedModel("m", 4, pooling="max")


def test_encoder_shape_mismatch_is_runtime_error():
    model = ServedModel("bad", 4, encoder=lambda text: np.ones((2, 3)))
    with pytest.raises(RuntimeError):
        model.encode_batch(["x"])


# -------------------------------------------------------------- registry


def test_duplicate_model_names_rejected():
    with pytest.raises(ValueError):
        EmbedServer([demo_model("m", 4), demo_model("m", 8)])


def test_empty_model_list_rejected():
    with pytest.raises(ValueError):
        EmbedServer([])


def test_parse_models():
    models = parse_models("bert-12:768,use:512", pooling="first")
    assert [(m.name, m.dim, m.pooling) for m in models] == [
        ("bert-12", 768, "first"),
        ("use", 512, "first"),
    ]


@pytest.mark.parametrize("bad", ["plain", "a:badnum", ":8", ""])
def test_parse_models_rejects_malformed_entries(bad):
    with pytest.raises(ValueError):
        parse_models(bad)


def test_parser_defaults():
    args = build_parser().parse_args(["--models", "a:8"])
    assert args.port == 8000
    assert args.pooling == "mean"
    assert args.host == "127.0.0.1"


def test_parser_requires_models():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


# ------------------------------------------------------------- HTTP layer


def test_embed_two_texts_returns_two_vectors(server):
    resp = post_embed(server, {"model": "toy-mean", "texts": ["one two", "three four"]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["dim"] == 6
    assert len(body["embeddings"]) == 2
    assert all(len(vec) == 6 for vec in body["embeddings"])


def test_embed_preserves_request_order(server):
    fwd = post_embed(server, {"model": "toy-mean", "texts": ["aa", "bb"]}).json()["embeddings"]
    rev = post_embed(server, {"model": "toy-mean", "texts": ["bb", "aa"]}).json()["embeddings"]
    assert fwd[0] == rev[1]
    assert fwd[1] == rev[0]


def test_same_text_same_vector_across_requests(server):
    one = post_embed(server, {"model": "toy-mean", "texts": ["stable request"]}).json()
    two = post_embed(server, {"model": "toy-mean", "texts": ["stable request"]}).json()
    assert one == two


def test_empty_batch_is_400(server):
    assert post_embed(server, {"model": "toy-mean", "texts": []}).status_code == 400


def test_malformed_body_is_400(server):
    resp = requests.post(server.endpoint + "/embed", data="not json", timeout=10)
    assert resp.status_code == 400
    assert post_embed(server, {"model": "toy-mean", "texts": "not a list"}).status_code == 400
    assert post_embed(server, {"model": "toy-mean", "texts": ["ok", 3]}).status_code == 400
    assert post_embed(server, {"texts": ["missing model"]}).status_code == 400
    assert requests.post(server.endpoint + "/embed", json=[1, 2], timeout=10).status_code == 400


def test_unknown_model_is_404(server):
    resp = post_embed(server, {"model": "nope", "texts": ["x"]})
    assert resp.status_code == 404
    assert "nope" in resp.json()["error"]


def test_unknown_path_is_404(server):
    assert requests.get(server.endpoint + "/nowhere", timeout=10).status_code == 404
    assert requests.post(server.endpoint + "/health", json={}, timeout=10).status_code == 404
    assert requests.get(server.endpoint + "/embed", timeout=10).status_code == 404


def test_loading_model_is_503_until_ready():
    pending = ServedModel("slow", 3)
    with serve([pending]) as srv:
        resp = requests.post(srv.endpoint + "/embed", json={"model": "slow", "texts": ["x"]}, timeout=10)
        assert resp.status_code == 503
        pending.encoder = hash_encoder("slow", 3)
        resp = requests.post(srv.endpoint + "/embed", json={"model": "slow", "texts": ["x"]}, timeout=10)
        assert resp.status_code == 200


def test_encoder_failure_is_500():
    def broken(text):
        raise RuntimeError("checkpoint corrupt")

    with serve([ServedModel("bad", 3, encoder=broken)]) as srv:
        resp = requests.post(srv.endpoint + "/embed", json={"model": "bad", "texts": ["x"]}, timeout=10)
        assert resp.status_code == 500


def test_health_lists_models_with_pooling_metadata(server):
    resp = requests.get(server.endpoint + "/health", timeout=10)
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["models"] == [
        {"name": "toy-first", "dim": 4, "pooling": "first", "ready": True},
        {"name": "toy-mean", "dim": 6, "pooling": "mean", "ready": True},
    ]


def test_concurrent_requests_stay_deterministic(server):
    payload = {"model": "toy-mean", "texts": ["parallel one", "parallel two"]}

    def hit(_):
        resp = post_embed(server, payload)
        assert resp.status_code == 200
        return resp.json()

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(hit, range(16)))
    assert all(res == results[0] for res in results)


# -------------------------------------------------- primary client round-trip


def test_primary_client_round_trips_64_texts(server):
    embed = pytest.importorskip("connprobe.embed")
    texts = [f"batch sentence number {i} with marker token t{i}" for i in range(64)]
    vectors = embed.embed_remote(texts, server.endpoint, "toy-mean")
    assert len(vectors) == 64
    assert all(vec.dim == 6 and vec.values.shape == (6,) for vec in vectors)
    again = embed.embed_remote(texts, server.endpoint, "toy-mean")
    for first, second in zip(vectors, again):
        assert np.array_equal(first.values, second.values)


def test_primary_health_check_sees_served_models(server):
    embed = pytest.importorskip("connprobe.embed")
    body = embed.check_remote_health(server.endpoint)
    assert body["status"] == "ok"
    names = [entry["name"] for entry in body["models"]]
    assert names == ["toy-first", "toy-mean"]
    assert all("pooling" in entry for entry in body["models"])
