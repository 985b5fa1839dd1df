"""Deterministic feature-hashing text embedder and the cosine-distance primitive.

The embedder is intentionally simple: signed token hashing into a fixed
256-dimensional space. It is not a semantic model; it is a reproducible
stand-in whose tokenization and hashing are bit-exact contracts, so
retrieval and every distance-based metric have stable ground truth.
"""
from __future__ import annotations

import numpy as np

from .errors import ZeroVector

EMBEDDING_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK_64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _MASK_64
    return value


def tokenize(text: str) -> list[str]:
    """Lowercase the text and split it into maximal alphanumeric runs."""
    tokens: list[str] = []
    run: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            run.append(ch)
        elif run:
            tokens.append("".join(run))
            run = []
    if run:
        tokens.append("".join(run))
    return tokens


def token_bucket_sign(token: str) -> tuple[int, int]:
    """Hash a token to its (bucket, sign) pair.

    bucket = FNV-1a 64 of the UTF-8 bytes mod EMBEDDING_DIM; the sign is +1
    when bit 63 of the hash is clear, -1 otherwise.
    """
    digest = fnv1a_64(token.encode("utf-8"))
    sign = 1 if (digest >> 63) & 1 == 0 else -1
    return digest % EMBEDDING_DIM, sign


def embed_text(text: str) -> np.ndarray:
    """Embed text as a unit vector; token-free text maps to the zero vector."""
    vec = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    for token in tokenize(text):
        bucket, sign = token_bucket_sign(token)
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def is_zero(vec: np.ndarray) -> bool:
    return not np.any(vec)


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), clamped to [0, 2]. Undefined for zero vectors."""
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine distance is undefined for the zero vector")
    distance = 1.0 - float(np.dot(a, b)) / (norm_a * norm_b)
    return min(2.0, max(0.0, distance))
