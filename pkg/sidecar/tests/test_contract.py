"""Wire-contract tests against the in-process app with offline backends."""

import json
import math
import random
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from scorer_sidecar import SidecarConfig, create_app
from scorer_sidecar.backends import (
    HashEmbedBackend,
    LexicalNliBackend,
    OFFLINE_EMBED_MODEL,
    OFFLINE_NLI_MODEL,
)

WIRE = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "wire"

PROB_SUM_TOLERANCE = 1e-4


@pytest.fixture
def client():
    config = SidecarConfig(max_batch=64)
    app = create_app(config, LexicalNliBackend(), HashEmbedBackend())
    return TestClient(app)


@pytest.fixture
def tiny_client():
    config = SidecarConfig(max_batch=4)
    app = create_app(config, LexicalNliBackend(), HashEmbedBackend())
    return TestClient(app)


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


class TestHealthz:
    def test_reports_model_ids(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json() == {
            "status": "ok",
            "nli_model": OFFLINE_NLI_MODEL,
            "embed_model": OFFLINE_EMBED_MODEL,
        }


class TestNliEndpoint:
    def test_golden_request_schema(self, client):
        payload = json.loads((WIRE / "nli_request.json").read_text())
        response = client.post("/v1/nli", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert set(body) == {"model", "results"}
        assert body["model"] == OFFLINE_NLI_MODEL
        assert len(body["results"]) == len(payload["pairs"])
        for result in body["results"]:
            assert set(result) == {"entailment", "neutral", "contradiction"}
            for value in result.values():
                assert 0.0 <= value <= 1.0
            assert abs(sum(result.values()) - 1.0) <= PROB_SUM_TOLERANCE
            net = result["entailment"] - result["contradiction"]
            assert -1.0 <= net <= 1.0

    def test_contained_hypothesis_maximizes_entailment(self, client):
        payload = {"pairs": [{"premise": "A man sleeps.", "hypothesis": "A man sleeps."}]}
        result = client.post("/v1/nli", json=payload).json()["results"][0]
        assert result["entailment"] == max(result.values())

    def test_order_preserved(self, client):
        premise = "alpha beta gamma delta"
        payload = {
            "pairs": [
                {"premise": premise, "hypothesis": "alpha beta gamma delta"},
                {"premise": premise, "hypothesis": "alpha zeta"},
                {"premise": premise, "hypothesis": "omega zeta"},
            ]
        }
        results = client.post("/v1/nli", json=payload).json()["results"]
        entailments = [r["entailment"] for r in results]
        assert entailments[0] > entailments[1] > entailments[2]

    def test_batch_of_k_yields_k_results(self, client):
        pairs = [
            {"premise": f"premise number {i} text", "hypothesis": f"claim {i}"}
            for i in range(9)
        ]
        results = client.post("/v1/nli", json={"pairs": pairs}).json()["results"]
        assert len(results) == 9

    def test_deterministic_across_calls(self, client):
        payload = {
            "pairs": [{"premise": "The tide rose fast.", "hypothesis": "The tide rose."}]
        }
        first = client.post("/v1/nli", json=payload).json()
        second = client.post("/v1/nli", json=payload).json()
        assert first == second

    def test_empty_premise_rejected_with_field_name(self, client):
        payload = {
            "pairs": [
                {"premise": "Fine text.", "hypothesis": "Fine claim."},
                {"premise": "   ", "hypothesis": "Fine claim."},
            ]
        }
        response = client.post("/v1/nli", json=payload)
        assert response.status_code == 422
        assert "pairs[1].premise" in response.text

    def test_empty_hypothesis_rejected_with_field_name(self, client):
        payload = {"pairs": [{"premise": "Fine text.", "hypothesis": ""}]}
        response = client.post("/v1/nli", json=payload)
        assert response.status_code == 422
        assert "pairs[0].hypothesis" in response.text

    def test_oversize_batch_rejected_naming_max_batch(self, tiny_client):
        pairs = [
            {"premise": f"text {i} here", "hypothesis": "claim"} for i in range(5)
        ]
        response = tiny_client.post("/v1/nli", json={"pairs": pairs})
        assert response.status_code == 413
        assert "max_batch=4" in response.text

    def test_batch_at_limit_accepted(self, tiny_client):
        pairs = [
            {"premise": f"text {i} here", "hypothesis": "claim"} for i in range(4)
        ]
        assert tiny_client.post("/v1/nli", json={"pairs": pairs}).status_code == 200

    def test_malformed_body_rejected(self, client):
        assert client.post("/v1/nli", json={"pairs": "nope"}).status_code == 422
        assert client.post("/v1/nli", content=b"not json").status_code == 422

    def test_random_pairs_stay_in_bounds(self, client):
        rng = random.Random(1302)
        words = ["alpha", "beta", "gamma", "delta", "omega", "zeta", "theta", "kappa"]
        for _ in range(40):
            k = rng.randrange(1, 6)
            pairs = [
                {
                    "premise": " ".join(rng.choices(words, k=rng.randrange(2, 7))),
                    "hypothesis": " ".join(rng.choices(words, k=rng.randrange(1, 5))),
                }
                for _ in range(k)
            ]
            results = client.post("/v1/nli", json={"pairs": pairs}).json()["results"]
            assert len(results) == k
            for result in results:
                assert abs(sum(result.values()) - 1.0) <= PROB_SUM_TOLERANCE
                assert -1.0 <= result["entailment"] - result["contradiction"] <= 1.0


class TestEmbedEndpoint:
    def test_golden_request_schema(self, client):
        payload = json.loads((WIRE / "embed_request.json").read_text())
        response = client.post("/v1/embed", json=payload)
        assert response.status_code == 200
        body = response.json()
        assert set(body) == {"model", "dim", "vectors"}
        assert body["model"] == OFFLINE_EMBED_MODEL
        assert len(body["vectors"]) == len(payload["inputs"])
        for vector in body["vectors"]:
            assert len(vector) == body["dim"]

    def test_identical_inputs_identical_vectors(self, client):
        payload = json.loads((WIRE / "embed_request.json").read_text())
        assert payload["inputs"][0] == payload["inputs"][2]
        vectors = client.post("/v1/embed", json=payload).json()["vectors"]
        assert vectors[0] == vectors[2]
        assert vectors[0] != vectors[1]

    def test_self_cosine_is_one(self, client):
        vectors = client.post(
            "/v1/embed", json={"inputs": ["a cat sat", "a cat sat"]}
        ).json()["vectors"]
        assert abs(cosine(vectors[0], vectors[1]) - 1.0) <= 1e-5

    def test_k_inputs_k_vectors_same_dim(self, client):
        inputs = [f"sentence number {i}" for i in range(7)]
        body = client.post("/v1/embed", json={"inputs": inputs}).json()
        assert len(body["vectors"]) == 7
        assert {len(v) for v in body["vectors"]} == {body["dim"]}

    def test_deterministic_across_calls(self, client):
        payload = {"inputs": ["The tide rose fast."]}
        first = client.post("/v1/embed", json=payload).json()
        second = client.post("/v1/embed", json=payload).json()
        assert first == second

    def test_blank_input_rejected_with_field_name(self, client):
        response = client.post("/v1/embed", json={"inputs": ["fine", "  "]})
        assert response.status_code == 422
        assert "inputs[1]" in response.text

    def test_oversize_batch_rejected_naming_max_batch(self, tiny_client):
        inputs = [f"text {i}" for i in range(5)]
        response = tiny_client.post("/v1/embed", json={"inputs": inputs})
        assert response.status_code == 413
        assert "max_batch=4" in response.text


class TestBackendFailureSurfacesAs500:
    def test_nli_backend_error(self):
        class Broken:
            model_id = "broken"

            def predict(self, pairs):
                raise RuntimeError("weights corrupted")

        app = create_app(SidecarConfig(), Broken(), HashEmbedBackend())
        response = TestClient(app, raise_server_exceptions=False).post(
            "/v1/nli",
            json={"pairs": [{"premise": "text", "hypothesis": "claim"}]},
        )
        assert response.status_code == 500
        assert "weights corrupted" in response.text


class TestConfigValidation:
    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            SidecarConfig(max_batch=0)
        with pytest.raises(ValueError):
            SidecarConfig(port=0)
        with pytest.raises(ValueError):
            SidecarConfig(nli_model_id="")
