"""Wire-protocol conformance, exercised with the simulator's recorded
request/response fixtures."""

import base64
import io
import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from segserv import HeuristicBackend, create_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture()
def request_fixture():
    return json.loads((FIXTURES / "segment_request.json").read_text())


@pytest.fixture()
def loaded_client():
    return TestClient(create_app(backend=HeuristicBackend()))


@pytest.fixture()
def unloaded_client():
    return TestClient(create_app(backend=None))


def decode_gray(b64: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))))


def request_dims(req: dict) -> tuple[int, int]:
    img = Image.open(io.BytesIO(base64.b64decode(req["image"])))
    return img.size[1], img.size[0]


class TestSegmentEndpoint:
    def test_recorded_request_yields_dimension_matching_heatmap(self, loaded_client, request_fixture):
        resp = loaded_client.post("/v1/segment", json=request_fixture)
        assert resp.status_code == 200
        doc = resp.json()
        assert set(doc) == {"heatmap", "model", "latency_ms"}
        heat = decode_gray(doc["heatmap"])
        assert heat.shape == request_dims(request_fixture)
        assert heat.dtype == np.uint8

    def test_matches_recorded_response_heatmap(self, loaded_client, request_fixture):
        recorded = json.loads((FIXTURES / "segment_response.json").read_text())
        resp = loaded_client.post("/v1/segment", json=request_fixture)
        assert resp.json()["heatmap"] == recorded["heatmap"]
        assert resp.json()["model"] == recorded["model"]

    def test_deterministic_across_identical_requests(self, loaded_client, request_fixture):
        a = loaded_client.post("/v1/segment", json=request_fixture).json()["heatmap"]
        b = loaded_client.post("/v1/segment", json=request_fixture).json()["heatmap"]
        assert a == b

    def test_empty_prompts_is_400(self, loaded_client, request_fixture):
        bad = dict(request_fixture, prompts=[])
        assert loaded_client.post("/v1/segment", json=bad).status_code == 400
        blank = dict(request_fixture, prompts=["  "])
        assert loaded_client.post("/v1/segment", json=blank).status_code == 400

    def test_threshold_out_of_range_is_400(self, loaded_client, request_fixture):
        bad = dict(request_fixture, threshold=1.5)
        assert loaded_client.post("/v1/segment", json=bad).status_code == 400

    def test_undecodable_image_is_400(self, loaded_client, request_fixture):
        bad = dict(request_fixture, image="bm90IGEgcG5n")
        assert loaded_client.post("/v1/segment", json=bad).status_code == 400

    def test_missing_field_is_400(self, loaded_client, request_fixture):
        bad = {k: v for k, v in request_fixture.items() if k != "image"}
        assert loaded_client.post("/v1/segment", json=bad).status_code == 400

    def test_before_model_load_is_503(self, unloaded_client, request_fixture):
        assert unloaded_client.post("/v1/segment", json=request_fixture).status_code == 503

    def test_prompt_fusion_is_elementwise_max(self, request_fixture):
        class TwoMapBackend:
            name = "two-maps"

            def heatmaps(self, image_rgb, prompts):
                h, w = image_rgb.shape[:2]
                maps = np.zeros((len(prompts), h, w))
                maps[0, :, : w // 2] = 0.25
                if len(prompts) > 1:
                    maps[1, :, w // 2 :] = 0.75
                return maps

        client = TestClient(create_app(backend=TwoMapBackend()))
        resp = client.post("/v1/segment", json=request_fixture)
        heat = decode_gray(resp.json()["heatmap"])
        h, w = heat.shape
        assert heat[0, 0] == round(0.25 * 255)
        assert heat[0, w - 1] == round(0.75 * 255)


class TestHealth:
    def test_healthz_before_load(self, unloaded_client):
        assert unloaded_client.get("/healthz").status_code == 503

    def test_healthz_after_load(self, loaded_client):
        resp = loaded_client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["model"] == "heuristic-greenness"


class TestHeuristicBackend:
    def test_green_scores_high_gray_scores_zero(self):
        backend = HeuristicBackend()
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[:2] = (96, 160, 64)    # grass-green
        img[2:] = (120, 120, 128)  # building-gray
        maps = backend.heatmaps(img, ["grass"])
        assert maps.shape == (1, 4, 4)
        assert maps[0, 0, 0] == 1.0
        assert maps[0, 3, 3] == 0.0
