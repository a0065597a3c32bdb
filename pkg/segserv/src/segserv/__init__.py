"""Landing-heatmap segmentation microservice.

Serves POST /v1/segment: text-prompted per-pixel landing-suitability
heatmaps for RGB images, fused across prompts by elementwise max. The
protocol is shared with the simulator's remote segmentation client.
"""

from .app import create_app
from .config import ServiceConfig
from .models import ClipSegBackend, HeuristicBackend

__version__ = "0.1.0"
