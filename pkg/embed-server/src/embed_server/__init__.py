"""HTTP microservice exposing sentence encoders over a fixed JSON contract."""

from embed_server.server import (
    EmbedServer,
    ServedModel,
    demo_model,
    hash_encoder,
    parse_models,
    pool_tokens,
    serve,
)

__all__ = [
    "EmbedServer",
    "ServedModel",
    "demo_model",
    "hash_encoder",
    "parse_models",
    "pool_tokens",
    "serve",
]
