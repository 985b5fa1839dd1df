"""Embedder contracts: hashing, tokenization, norms, cosine distance."""
from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from faceoracle.embedding import (
    EMBEDDING_DIM,
    cosine_distance,
    embed_text,
    fnv1a_64,
    is_zero,
    token_bucket_sign,
    tokenize,
)
from faceoracle.errors import ZeroVector
from helpers import cosine_oracle, embed_oracle, fnv_oracle

VECTORS_PATH = Path(__file__).parent / "data" / "embedding_test_vectors.json"


def test_fnv1a_known_values():
    # published FNV-1a 64 test vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_fnv1a_matches_reference_oracle():
    rng = random.Random(17)
    for _ in range(200):
        data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 40)))
        assert fnv1a_64(data) == fnv_oracle(data)


def test_shipped_test_vectors():
    vectors = json.loads(VECTORS_PATH.read_text())
    assert vectors["dim"] == EMBEDDING_DIM
    for entry in vectors["tokens"]:
        assert fnv1a_64(entry["token"].encode("utf-8")) == int(entry["hash"])
        assert token_bucket_sign(entry["token"]) == (entry["bucket"], entry["sign"])
    for entry in vectors["texts"]:
        assert tokenize(entry["text"]) == entry["tokens"]
        vec = embed_text(entry["text"])
        expected = np.zeros(EMBEDDING_DIM)
        for bucket, value in entry["nonzero"].items():
            expected[int(bucket)] = value
        assert np.allclose(vec, expected, atol=1e-12)


def test_tokenize_rules():
    assert tokenize("What is unified quality score?") == [
        "what", "is", "unified", "quality", "score",
    ]
    assert tokenize("over-exposure at 29,794!") == ["over", "exposure", "at", "29", "794"]
    assert tokenize("   ") == []
    assert tokenize("") == []


def test_embed_deterministic():
    text = "illumination uniformity of the face region"
    assert np.array_equal(embed_text(text), embed_text(text))


def test_embed_token_multiplicity_scales_out():
    assert np.array_equal(embed_text("face face"), embed_text("face"))


def test_embed_empty_is_zero_vector():
    vec = embed_text("!!! ---")
    assert is_zero(vec)
    assert vec.shape == (EMBEDDING_DIM,)


def test_distinct_phrases_have_positive_distance():
    # derived with the standalone reference embedder
    a_oracle = embed_oracle("illumination uniformity")
    b_oracle = embed_oracle("dynamic range")
    assert cosine_oracle(a_oracle, b_oracle) > 0
    a = embed_text("illumination uniformity")
    b = embed_text("dynamic range")
    assert np.allclose(a, a_oracle, atol=1e-12)
    assert np.allclose(b, b_oracle, atol=1e-12)
    assert cosine_distance(a, b) > 0


def test_cosine_identical_unit_vectors():
    vec = embed_text("sharpness")
    assert cosine_distance(vec, vec) == pytest.approx(0.0, abs=1e-9)


def test_cosine_orthogonal_and_opposite():
    a = np.zeros(EMBEDDING_DIM)
    b = np.zeros(EMBEDDING_DIM)
    a[0] = 1.0
    b[1] = 1.0
    assert cosine_distance(a, b) == pytest.approx(1.0)
    assert cosine_distance(a, -a) == pytest.approx(2.0)


def test_cosine_zero_vector_raises():
    with pytest.raises(ZeroVector):
        cosine_distance(np.zeros(EMBEDDING_DIM), embed_text("face"))
    with pytest.raises(ZeroVector):
        cosine_distance(embed_text("face"), np.zeros(EMBEDDING_DIM))


def test_cosine_symmetric_and_scale_invariant():
    rng = random.Random(5)
    words = ["face", "image", "quality", "pose", "light", "band", "score", "check"]
    for _ in range(100):
        a = embed_text(" ".join(rng.choices(words, k=rng.randint(1, 6))))
        b = embed_text(" ".join(rng.choices(words, k=rng.randint(1, 6))))
        if is_zero(a) or is_zero(b):
            continue
        assert cosine_distance(a, b) == pytest.approx(cosine_distance(b, a), abs=1e-12)
        scale = rng.uniform(0.001, 1000.0)
        assert cosine_distance(a, scale * b) == pytest.approx(
            cosine_distance(a, b), abs=1e-9
        )


def test_embed_norm_property():
    rng = random.Random(12)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    for _ in range(500):
        tokens = [
            "".join(rng.choices(alphabet, k=rng.randint(1, 10)))
            for _ in range(rng.randint(1, 10))
        ]
        vec = embed_text(" ".join(tokens))
        if is_zero(vec):
            continue  # full sign cancellation across buckets; norm rule vacuous
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)


def test_shared_tokens_never_rank_below_disjoint():
    chunk_text = "background uniformity requires a plain light backdrop"
    chunk_vec = embed_text(chunk_text)
    sharing = embed_text("how uniform must the background backdrop be")
    disjoint = embed_text("giraffe synthesizer waltz electron")
    sim_sharing = 1.0 - cosine_distance(sharing, chunk_vec)
    sim_disjoint = 1.0 - cosine_distance(disjoint, chunk_vec)
    assert sim_sharing >= sim_disjoint
    assert sim_sharing > 0
