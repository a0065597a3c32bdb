"""Model backends producing per-prompt heatmaps in [0, 1].

A backend exposes ``name`` and ``heatmaps(image_rgb, prompts)`` returning a
(num_prompts, h, w) float array. The service owns fusion and resizing.
"""

from __future__ import annotations

import numpy as np


class HeuristicBackend:
    """Deterministic non-neural stand-in: scores pixels by greenness.

    Useful for offline integration tests and demos against the simulator's
    color-rendered label images, where landable terrain is drawn green.
    """

    name = "heuristic-greenness"

    def heatmaps(self, image_rgb: np.ndarray, prompts: list[str]) -> np.ndarray:
        rgb = image_rgb.astype(np.float64) / 255.0
        r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
        greenness = np.clip(g - 0.5 * (r + b), 0.0, 1.0)
        score = np.clip(greenness * 4.0, 0.0, 1.0)
        return np.repeat(score[None, :, :], len(prompts), axis=0)


class ClipSegBackend:
    """Zero-shot text-prompted segmentation with a pre-trained CLIPSeg model.

    Imports torch/transformers lazily so the service can run without them
    when a different backend is selected. Inference is set up to be
    deterministic: eval mode, no grad, fixed sigmoid post-processing.
    """

    def __init__(self, model_id: str = "CIDAS/clipseg-rd64-refined", device: str = "cpu"):
        import torch
        from transformers import CLIPSegForImageSegmentation, CLIPSegProcessor

        self._torch = torch
        self.name = model_id
        self.device = device
        self.processor = CLIPSegProcessor.from_pretrained(model_id)
        self.model = CLIPSegForImageSegmentation.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()

    def heatmaps(self, image_rgb: np.ndarray, prompts: list[str]) -> np.ndarray:
        from PIL import Image

        torch = self._torch
        image = Image.fromarray(image_rgb, mode="RGB")
        inputs = self.processor(
            text=list(prompts),
            images=[image] * len(prompts),
            return_tensors="pt",
            padding=True,
        ).to(self.device)
        with torch.no_grad():
            logits = self.model(**inputs).logits
        if logits.ndim == 2:  # single prompt collapses the batch dim
            logits = logits[None, :, :]
        return torch.sigmoid(logits).cpu().numpy()


def load_backend(model: str, model_id: str, device: str):
    if model == "heuristic":
        return HeuristicBackend()
    if model == "clipseg":
        return ClipSegBackend(model_id=model_id, device=device)
    raise ValueError(f"unknown model backend: {model}")
