import hashlib
import math

import numpy as np
import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from tableforge.embedding import (
    EmbeddingError,
    HashedBowEmbedder,
    RemoteEmbeddingProvider,
    cosine_similarity,
    fused_similarity,
    normalize_rows,
    tokenize,
)


def _oracle_vector(text, dimension, seed):
    """Independent hashed-BoW recomputation used to pin the layout."""
    import re

    v = np.zeros(dimension)
    for token in re.findall(r"[a-z0-9]+", text.lower()):
        digest = hashlib.blake2b(
            f"{seed}\x1f{token}".encode(), digest_size=9
        ).digest()
        idx = int.from_bytes(digest[:8], "little") % dimension
        v[idx] += 1.0 if digest[8] & 1 else -1.0
    n = np.linalg.norm(v)
    return v / n if n else v


class TestTokenize:
    def test_lowercases_and_splits_on_non_alnum(self):
        assert tokenize("Games. Year, Host. 2000, Sydney") == [
            "games",
            "year",
            "host",
            "2000",
            "sydney",
        ]

    def test_empty_and_symbol_only(self):
        assert tokenize("") == []
        assert tokenize("!!! --- ...") == []

    def test_digits_kept_with_letters(self):
        assert tokenize("v2 and 3d") == ["v2", "and", "3d"]


class TestHashedBowEmbedder:
    def test_matches_hash_layout(self):
        emb = HashedBowEmbedder(dimension=64, seed=3)
        for text in ("alpha beta", "Games. Year, Host.", "a a a b"):
            np.testing.assert_allclose(
                emb.embed_one(text), _oracle_vector(text, 64, 3)
            )

    def test_unit_norm(self):
        emb = HashedBowEmbedder(dimension=128, seed=0)
        v = emb.embed_one("some plain text here")
        assert math.isclose(float(np.linalg.norm(v)), 1.0, rel_tol=1e-12)

    def test_empty_text_is_zero_vector(self):
        emb = HashedBowEmbedder(dimension=32, seed=0)
        assert not emb.embed_one("").any()
        assert not emb.embed_one("???").any()

    def test_deterministic_across_instances(self):
        a = HashedBowEmbedder(dimension=256, seed=7)
        b = HashedBowEmbedder(dimension=256, seed=7)
        np.testing.assert_array_equal(
            a.embed_one("repeat me"), b.embed_one("repeat me")
        )

    def test_seed_changes_layout(self):
        a = HashedBowEmbedder(dimension=256, seed=0)
        b = HashedBowEmbedder(dimension=256, seed=1)
        assert not np.array_equal(
            a.embed_one("repeat me"), b.embed_one("repeat me")
        )

    def test_case_insensitive(self):
        emb = HashedBowEmbedder(dimension=64, seed=0)
        np.testing.assert_array_equal(
            emb.embed_one("Hello World"), emb.embed_one("hello world")
        )

    def test_token_counts_accumulate(self):
        emb = HashedBowEmbedder(dimension=64, seed=0)
        one = emb.embed_one("solo")
        # same token three times still normalizes to the same unit vector
        np.testing.assert_allclose(emb.embed_one("solo solo solo"), one)

    def test_batch_matches_single(self):
        emb = HashedBowEmbedder(dimension=64, seed=0)
        texts = ["a b c", "", "numbers 1 2 3"]
        batch = emb.embed(texts)
        assert batch.shape == (3, 64)
        for i, t in enumerate(texts):
            np.testing.assert_array_equal(batch[i], emb.embed_one(t))

    def test_tiny_dimension_rejected(self):
        with pytest.raises(ValueError):
            HashedBowEmbedder(dimension=1)

    @settings(max_examples=50, deadline=None)
    @given(st.text(alphabet="abc XYZ019", max_size=60))
    def test_norm_is_zero_or_one(self, text):
        emb = HashedBowEmbedder(dimension=32, seed=5)
        n = float(np.linalg.norm(emb.embed_one(text)))
        assert math.isclose(n, 1.0, rel_tol=1e-9) or n == 0.0


class _FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class _FakeSession:
    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def _remote(session, dimension=3, **kwargs):
    kwargs.setdefault("sleep", lambda s: None)
    return RemoteEmbeddingProvider(
        endpoint="http://embed.internal",
        model="enc",
        dimension=dimension,
        session=session,
        **kwargs,
    )


class TestRemoteEmbeddingProvider:
    def test_success_renormalizes_rows(self):
        session = _FakeSession(
            [_FakeResponse(payload={"vectors": [[3.0, 0.0, 4.0]]})]
        )
        out = _remote(session).embed(["hi"])
        np.testing.assert_allclose(out, [[0.6, 0.0, 0.8]])
        assert session.calls[0]["url"] == "http://embed.internal/embed"
        assert session.calls[0]["json"] == {"model": "enc", "texts": ["hi"]}

    def test_shape_mismatch_raises(self):
        session = _FakeSession(
            [_FakeResponse(payload={"vectors": [[1.0, 0.0]]})]
        )
        with pytest.raises(EmbeddingError, match="shape"):
            _remote(session).embed(["hi"])

    def test_server_errors_retried(self):
        session = _FakeSession(
            [
                _FakeResponse(status_code=500),
                requests.ConnectionError("down"),
                _FakeResponse(payload={"vectors": [[0.0, 1.0, 0.0]]}),
            ]
        )
        out = _remote(session).embed(["hi"])
        assert out.shape == (1, 3)
        assert len(session.calls) == 3

    def test_client_error_fails_fast(self):
        session = _FakeSession([_FakeResponse(status_code=422, text="bad")])
        with pytest.raises(EmbeddingError, match="422"):
            _remote(session).embed(["hi"])
        assert len(session.calls) == 1

    def test_exhausted_retries(self):
        session = _FakeSession([_FakeResponse(status_code=502)] * 3)
        with pytest.raises(EmbeddingError, match="3 attempts"):
            _remote(session).embed(["hi"])

    def test_malformed_payload(self):
        session = _FakeSession([_FakeResponse(payload={"nope": 1})])
        with pytest.raises(EmbeddingError, match="malformed"):
            _remote(session).embed(["hi"])

    def test_bearer_token(self, monkeypatch):
        monkeypatch.setenv("EMB_TOKEN", "tok")
        session = _FakeSession(
            [_FakeResponse(payload={"vectors": [[1.0, 0.0, 0.0]]})]
        )
        _remote(session, token_env="EMB_TOKEN").embed(["hi"])
        assert session.calls[0]["headers"]["Authorization"] == "Bearer tok"


class TestNormalizeRows:
    def test_rows_become_unit(self):
        m = np.array([[3.0, 4.0], [0.0, 2.0]])
        out = normalize_rows(m)
        np.testing.assert_allclose(
            np.linalg.norm(out, axis=1), [1.0, 1.0]
        )

    def test_zero_rows_stay_zero(self):
        m = np.array([[0.0, 0.0], [1.0, 0.0]])
        out = normalize_rows(m)
        np.testing.assert_array_equal(out[0], [0.0, 0.0])

    def test_input_not_mutated(self):
        m = np.array([[3.0, 4.0]])
        normalize_rows(m)
        np.testing.assert_array_equal(m, [[3.0, 4.0]])


class TestCosineSimilarity:
    def test_parallel(self):
        assert cosine_similarity([1.0, 0.0], [2.0, 0.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 5.0]) == pytest.approx(0.0)

    def test_opposite(self):
        assert cosine_similarity([1.0, 1.0], [-1.0, -1.0]) == pytest.approx(
            -1.0
        )

    def test_zero_vector_gives_zero(self):
        assert cosine_similarity([0.0, 0.0], [1.0, 0.0]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_known_angle(self):
        # 45 degrees
        assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(
            math.sqrt(0.5)
        )


class TestFusedSimilarity:
    def test_default_weight(self):
        assert fused_similarity(1.0, 0.0) == pytest.approx(0.9)
        assert fused_similarity(0.0, 1.0) == pytest.approx(0.1)

    def test_custom_weight(self):
        assert fused_similarity(0.5, 1.0, weight=0.5) == pytest.approx(0.75)

    def test_weight_bounds(self):
        with pytest.raises(ValueError):
            fused_similarity(0.5, 0.5, weight=1.5)
        with pytest.raises(ValueError):
            fused_similarity(0.5, 0.5, weight=-0.1)

    @given(
        st.floats(min_value=-1, max_value=1),
        st.floats(min_value=-1, max_value=1),
        st.floats(min_value=0, max_value=1),
    )
    def test_result_between_inputs(self, a, b, w):
        out = fused_similarity(a, b, weight=w)
        assert min(a, b) - 1e-12 <= out <= max(a, b) + 1e-12
