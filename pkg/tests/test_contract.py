"""Wire-contract fixtures shared with the segmentation service.

The recorded request must be byte-reproducible from this package's encoder,
and the recorded response must decode into exactly the ground-truth mask of
the canonical view, proving both sides speak the same protocol without
shims.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import numpy as np
import pytest

from safeland.segmentation import (
    ServiceClient,
    build_segment_request,
    label_image_to_rgb,
    png_b64_decode,
    remote_segment,
)
from safeland.world import TerrainClass, safe_mask

FIXTURES = Path(__file__).parent / "fixtures"
PROMPTS = ["grass", "open field", "park"]


def canonical_view():
    view = np.zeros((48, 64), dtype=np.uint8)
    view[10:30, 8:28] = TerrainClass.BUILDING
    view[32:44, 40:60] = TerrainClass.WATER
    return view


@pytest.fixture()
def request_fixture():
    return json.loads((FIXTURES / "segment_request.json").read_text())


@pytest.fixture()
def response_fixture():
    return json.loads((FIXTURES / "segment_response.json").read_text())


class TestRequestFixture:
    def test_encoder_reproduces_recorded_request(self, request_fixture):
        rgb = label_image_to_rgb(canonical_view())
        assert build_segment_request(rgb, PROMPTS, 0.5) == request_fixture

    def test_recorded_image_decodes_to_palette_rendering(self, request_fixture):
        rgb = png_b64_decode(request_fixture["image"])
        assert np.array_equal(rgb, label_image_to_rgb(canonical_view()))


class TestResponseFixture:
    def test_heatmap_dimensions_match_request_image(self, request_fixture, response_fixture):
        img = png_b64_decode(request_fixture["image"])
        heat = png_b64_decode(response_fixture["heatmap"])
        assert heat.shape == img.shape[:2]

    def test_client_threshold_recovers_ground_truth_mask(self, response_fixture):
        # served heatmap binarized at the canonical threshold equals the true
        # safe mask of the view the request was recorded from
        handler = _canned_response_handler(response_fixture)
        server = HTTPServer(("127.0.0.1", 0), handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            client = ServiceClient(f"http://127.0.0.1:{server.server_port}", timeout_s=5.0)
            view = canonical_view()
            out = remote_segment(client, label_image_to_rgb(view), PROMPTS, 0.5)
            assert np.array_equal(out.mask, safe_mask(view))
        finally:
            server.shutdown()


def _canned_response_handler(doc):
    body = json.dumps(doc).encode()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            self.rfile.read(int(self.headers["Content-Length"]))
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(body)

    return Handler
