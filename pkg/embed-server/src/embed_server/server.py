"""Serve sentence embeddings over HTTP behind a two-route JSON contract.

POST /embed   {"model": str, "texts": [str, ...]}
           -> 200 {"dim": int, "embeddings": [[float, ...], ...]}
GET  /health -> 200 {"status": "ok", "models": [{name, dim, pooling, ready}, ...]}

Status codes: 400 for a malformed or empty batch, 404 for an unknown model
or path, 503 while a model is still loading, 500 if inference itself fails.
Embeddings preserve request order and the response count always equals the
request count. Inference is serialized per model, so the same text yields a
bit-identical vector on every request.

Real checkpoints are user-supplied: a ServedModel wraps any callable that
maps one text to a (n_tokens, dim) float matrix, and the server pools that
matrix into a sentence vector. The built-in hash encoder is a deterministic
stand-in that makes the service runnable end to end without model weights.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import threading
from collections.abc import Callable, Iterable, Sequence
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

POOLING_RULES = ("mean", "first")


def pool_tokens(vectors: np.ndarray, rule: str) -> np.ndarray:
    """Collapse a (n_tokens, dim) matrix into one sentence vector.

    "mean" averages over tokens, "first" returns the first row unchanged;
    with a single token both rules agree. Requires at least one row.
    """
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ValueError(f"expected a (n_tokens, dim) matrix with n_tokens >= 1, got shape {mat.shape}")
    if rule == "mean":
        return mat.mean(axis=0)
    if rule == "first":
        return mat[0].copy()
    raise ValueError(f"unknown pooling rule {rule!r}, expected one of {POOLING_RULES}")


def hash_encoder(model_name: str, dim: int) -> Callable[[str], np.ndarray]:
    """Deterministic stand-in encoder for running the service without weights.

    Each whitespace token maps to a fixed pseudo-random vector seeded by a
    hash of (model name, token), so equal texts always produce equal token
    matrices and different model names produce unrelated spaces. An empty
    text is treated as one empty-string token to keep the matrix non-empty.
    """

    def encode(text: str) -> np.ndarray:
        tokens = text.split() or [""]
        rows = np.empty((len(tokens), dim), dtype=np.float64)
        for i, tok in enumerate(tokens):
            digest = hashlib.sha256(f"{model_name}\x00{tok}".encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "big")
            rows[i] = np.random.default_rng(seed).standard_normal(dim)
        return rows

    return encode


class ServedModel:
    """One embedding model behind the service.

    `encoder` maps a text to a (n_tokens, dim) matrix; None means the model
    is still loading and requests for it answer 503. Inference grabs a
    per-model lock so concurrent requests cannot interleave.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        pooling: str = "mean",
        encoder: Callable[[str], np.ndarray] | None = None,
    ) -> None:
        if not name:
            raise ValueError("model name must be non-empty")
        if dim < 1:
            raise ValueError(f"model {name!r}: dim must be >= 1, got {dim}")
        if pooling not in POOLING_RULES:
            raise ValueError(f"model {name!r}: unknown pooling rule {pooling!r}")
        self.name = name
        self.dim = dim
        self.pooling = pooling
        self.encoder = encoder
        self._lock = threading.Lock()

    @property
    def ready(self) -> bool:
        return self.encoder is not None

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "pooling": self.pooling, "ready": self.ready}

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Embed texts in order, returning a (len(texts), dim) matrix."""
        if self.encoder is None:
            raise RuntimeError(f"model {self.name!r} is not loaded")
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        with self._lock:
            for i, text in enumerate(texts):
                mat = np.asarray(self.encoder(text), dtype=np.float64)
                if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] != self.dim:
                    raise RuntimeError(
                        f"model {self.name!r} returned shape {mat.shape} for one text, expected (>=1, {self.dim})"
                    )
                out[i] = pool_tokens(mat, self.pooling)
        return out


def demo_model(name: str, dim: int, pooling: str = "mean") -> ServedModel:
    """ServedModel backed by the deterministic hash encoder."""
    return ServedModel(name, dim, pooling, encoder=hash_encoder(name, dim))


class _HTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    models: dict[str, ServedModel]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: _HTTPServer

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        pass

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path != "/health":
            self._send(404, {"error": f"unknown path {self.path!r}"})
            return
        models = [self.server.models[name].describe() for name in sorted(self.server.models)]
        self._send(200, {"status": "ok", "models": models})

    def do_POST(self) -> None:
        if self.path != "/embed":
            self._send(404, {"error": f"unknown path {self.path!r}"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        try:
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(payload, dict):
            self._send(400, {"error": "request body must be a JSON object"})
            return
        name = payload.get("model")
        texts = payload.get("texts")
        if not isinstance(name, str):
            self._send(400, {"error": "field 'model' must be a string"})
            return
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            self._send(400, {"error": "field 'texts' must be a list of strings"})
            return
        if not texts:
            self._send(400, {"error": "empty batch"})
            return
        model = self.server.models.get(name)
        if model is None:
            self._send(404, {"error": f"unknown model {name!r}"})
            return
        if not model.ready:
            self._send(503, {"error": f"model {name!r} is still loading"})
            return
        try:
            embeddings = model.encode_batch(texts)
        except RuntimeError as exc:
            self._send(500, {"error": str(exc)})
            return
        self._send(200, {"dim": model.dim, "embeddings": embeddings.tolist()})


class EmbedServer:
    """Threaded HTTP server wrapping a registry of ServedModels."""

    def __init__(self, models: Iterable[ServedModel], port: int = 0, host: str = "127.0.0.1") -> None:
        registry: dict[str, ServedModel] = {}
        for model in models:
            if model.name in registry:
                raise ValueError(f"duplicate model name {model.name!r}")
            registry[model.name] = model
        if not registry:
            raise ValueError("at least one model is required")
        self._httpd = _HTTPServer((host, port), _Handler)
        self._httpd.models = registry
        self._thread: threading.Thread | None = None
        self.host = host
        self.models = registry

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def endpoint(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "EmbedServer":
        if self._thread is not None:
            return self
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def wait(self) -> None:
        if self._thread is not None:
            self._thread.join()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._httpd.shutdown()
        self._thread.join()
        self._httpd.server_close()
        self._thread = None

    def __enter__(self) -> "EmbedServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(models: Iterable[ServedModel], port: int = 0, host: str = "127.0.0.1") -> EmbedServer:
    """Start serving in a background thread and return the running server."""
    return EmbedServer(models, port=port, host=host).start()


def parse_models(spec: str, pooling: str = "mean") -> list[ServedModel]:
    """Parse a --models flag value such as "bert-12:768,use:512"."""
    models = []
    for entry in spec.split(","):
        entry = entry.strip()
        name, sep, dim_text = entry.rpartition(":")
        if not sep or not name:
            raise ValueError(f"model entry {entry!r} must look like name:dim")
        try:
            dim = int(dim_text)
        except ValueError:
            raise ValueError(f"model entry {entry!r} has a non-integer dimension") from None
        models.append(demo_model(name, dim, pooling))
    return models


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-server",
        description="Serve sentence embeddings over POST /embed and GET /health.",
    )
    parser.add_argument("--models", required=True, help="comma-separated name:dim list, e.g. bert-12:768,use:512")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--pooling", choices=POOLING_RULES, default="mean", help="token pooling rule for all models")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        models = parse_models(args.models, pooling=args.pooling)
        server = serve(models, port=args.port, host=args.host)
    except (ValueError, OSError) as exc:
        print(f"embed-server: {exc}", file=sys.stderr)
        return 1
    print(f"embed-server listening on {server.endpoint}")
    for model in server.models.values():
        print(f"  model {model.name} dim={model.dim} pooling={model.pooling}")
    try:
        server.wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
