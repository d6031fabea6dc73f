"""Pretrained vision backbones producing per-frame embeddings.

DINOv2 emits the CLS-token embedding and carries no classifier head, so
frames get no confidence. ConvNeXt V2 is an ImageNet classifier: the
pooled features are the embedding and the max softmax probability over
its classes is the frame confidence.

Loading tries the published checkpoints; --no-pretrained swaps in a
seeded random-weight model with the same interface (small configs, fixed
dims) for offline smoke runs and CI. The store's backbone_tag records
which variant produced the embeddings.
"""

from __future__ import annotations

import logging

import cv2
import numpy as np
import torch

logger = logging.getLogger("mcvc_extract")

BACKBONES = ("dinov2", "convnextv2")

DINOV2_CHECKPOINT = "facebook/dinov2-base"
CONVNEXTV2_CHECKPOINT = "facebook/convnextv2-tiny-1k-224"

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

_INIT_SEED = 1234  # fixed init for --no-pretrained so re-runs are identical


class BackboneLoadError(RuntimeError):
    """Model weights could not be constructed or downloaded."""


def preprocess(frames_bgr: list[np.ndarray], size: int = 224) -> torch.Tensor:
    """BGR uint8 frames -> normalized NCHW float tensor."""
    batch = np.empty((len(frames_bgr), size, size, 3), dtype=np.float32)
    for i, frame in enumerate(frames_bgr):
        rgb = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
        resized = cv2.resize(rgb, (size, size), interpolation=cv2.INTER_AREA)
        batch[i] = resized.astype(np.float32) / 255.0
    batch = (batch - _IMAGENET_MEAN) / _IMAGENET_STD
    return torch.from_numpy(batch.transpose(0, 3, 1, 2))


class Backbone:
    """Wraps a torch model behind embed(frames) -> (embeddings, confidences)."""

    def __init__(self, name: str, tag: str, dim: int, has_confidence: bool,
                 model: torch.nn.Module, device: str, batch_size: int = 16):
        self.name = name
        self.tag = tag
        self.dim = dim
        self.has_confidence = has_confidence
        self.model = model.to(device).eval()
        self.device = device
        self.batch_size = batch_size

    def _forward(self, pixels: torch.Tensor) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError

    def embed(self, frames_bgr: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray | None]:
        """Embed BGR frames; confidences are None for headless backbones."""
        embeddings = []
        confidences = [] if self.has_confidence else None
        with torch.no_grad():
            for start in range(0, len(frames_bgr), self.batch_size):
                chunk = frames_bgr[start:start + self.batch_size]
                pixels = preprocess(chunk).to(self.device)
                emb, conf = self._forward(pixels)
                embeddings.append(emb)
                if confidences is not None:
                    confidences.append(conf)
        matrix = np.concatenate(embeddings).astype(np.float32)
        conf_arr = np.concatenate(confidences) if confidences is not None else None
        return matrix, conf_arr


class Dinov2Backbone(Backbone):
    def _forward(self, pixels):
        out = self.model(pixel_values=pixels)
        cls = out.last_hidden_state[:, 0]
        return cls.cpu().numpy(), None


class ConvNextV2Backbone(Backbone):
    def _forward(self, pixels):
        feats = self.model.convnextv2(pixel_values=pixels).pooler_output
        logits = self.model.classifier(feats)
        conf = torch.softmax(logits, dim=-1).max(dim=-1).values
        return feats.cpu().numpy(), conf.cpu().numpy()


def load_backbone(name: str, device: str = "cpu", pretrained: bool = True) -> Backbone:
    if name not in BACKBONES:
        raise BackboneLoadError(f"unknown backbone {name!r}, expected one of {BACKBONES}")
    if name == "dinov2":
        return _load_dinov2(device, pretrained)
    return _load_convnextv2(device, pretrained)


def _load_dinov2(device: str, pretrained: bool) -> Dinov2Backbone:
    from transformers import Dinov2Config, Dinov2Model

    if pretrained:
        try:
            model = Dinov2Model.from_pretrained(DINOV2_CHECKPOINT)
        except Exception as exc:
            raise BackboneLoadError(
                f"cannot load {DINOV2_CHECKPOINT}: {exc}; "
                "use --no-pretrained for an offline smoke run") from exc
        tag = DINOV2_CHECKPOINT
    else:
        torch.manual_seed(_INIT_SEED)
        config = Dinov2Config(hidden_size=384, num_hidden_layers=2,
                              num_attention_heads=6, image_size=224)
        model = Dinov2Model(config)
        tag = "dinov2-untrained"
        logger.warning("dinov2: random weights (--no-pretrained); embeddings are "
                       "only useful for format and plumbing checks")
    return Dinov2Backbone("dinov2", tag, model.config.hidden_size, False, model, device)


def _load_convnextv2(device: str, pretrained: bool) -> ConvNextV2Backbone:
    from transformers import ConvNextV2Config, ConvNextV2ForImageClassification

    if pretrained:
        try:
            model = ConvNextV2ForImageClassification.from_pretrained(CONVNEXTV2_CHECKPOINT)
        except Exception as exc:
            raise BackboneLoadError(
                f"cannot load {CONVNEXTV2_CHECKPOINT}: {exc}; "
                "use --no-pretrained for an offline smoke run") from exc
        tag = CONVNEXTV2_CHECKPOINT
    else:
        torch.manual_seed(_INIT_SEED)
        config = ConvNextV2Config(num_labels=1000, depths=[1, 1, 2, 1],
                                  hidden_sizes=[24, 48, 96, 192])
        model = ConvNextV2ForImageClassification(config)
        tag = "convnextv2-untrained"
        logger.warning("convnextv2: random weights (--no-pretrained); embeddings are "
                       "only useful for format and plumbing checks")
    dim = model.config.hidden_sizes[-1]
    return ConvNextV2Backbone("convnextv2", tag, dim, True, model, device)
