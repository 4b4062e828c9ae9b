"""Framework-free forward passes of the two fusion blocks.

Feature maps are plain ``(C, H, W)`` float64 arrays. Parameters are supplied
by the caller (seeded or loaded from a file); nothing here is trained.

Summation order is fixed: channel mixing uses one ``tensordot`` call and the
per-channel means use exactly rounded summation (``math.fsum``), so the
pooled statistic does not depend on pixel order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BlockError(ValueError):
    pass


def as_feature_map(x, name: str = "feature map") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise BlockError(f"{name} must have shape (C, H, W), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise BlockError(f"{name} contains non-finite values")
    return x


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --------------------------------------------------------------------------
# AMFM
# --------------------------------------------------------------------------


@dataclass
class AmfmParams:
    """1x1 projections for both branches and the two fusion logits."""

    proj_rgb: np.ndarray  # (C_out, C_rgb)
    proj_fem: np.ndarray  # (C_out, C_fem)
    logits: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.proj_rgb = np.atleast_2d(np.asarray(self.proj_rgb, dtype=np.float64))
        self.proj_fem = np.atleast_2d(np.asarray(self.proj_fem, dtype=np.float64))
        self.logits = tuple(float(v) for v in self.logits)
        if len(self.logits) != 2:
            raise BlockError("AMFM needs exactly two logits")
        if self.proj_rgb.shape[0] != self.proj_fem.shape[0]:
            raise BlockError(
                f"projections disagree on output channels: {self.proj_rgb.shape[0]} vs {self.proj_fem.shape[0]}"
            )

    @property
    def out_channels(self) -> int:
        return self.proj_rgb.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return softmax(self.logits)

    @classmethod
    def random(cls, c_rgb: int, c_fem: int, c_out: int, rng: np.random.Generator) -> "AmfmParams":
        scale_rgb = 1.0 / math.sqrt(c_rgb)
        scale_fem = 1.0 / math.sqrt(c_fem)
        return cls(
            proj_rgb=rng.normal(0.0, scale_rgb, size=(c_out, c_rgb)),
            proj_fem=rng.normal(0.0, scale_fem, size=(c_out, c_fem)),
            logits=tuple(rng.normal(0.0, 1.0, size=2)),
        )


def project(weight: np.ndarray, x: np.ndarray) -> np.ndarray:
    """1x1 convolution: per-pixel channel mixing ``out[o] = sum_c W[o, c] x[c]``."""
    return np.tensordot(weight, x, axes=([1], [0]))


def amfm_fuse(rgb_feat, fem_feat, p: AmfmParams) -> np.ndarray:
    rgb_feat = as_feature_map(rgb_feat, "rgb_feat")
    fem_feat = as_feature_map(fem_feat, "fem_feat")
    if rgb_feat.shape[1:] != fem_feat.shape[1:]:
        raise BlockError(f"spatial dimensions differ: {rgb_feat.shape[1:]} vs {fem_feat.shape[1:]}")
    if p.proj_rgb.shape[1] != rgb_feat.shape[0]:
        raise BlockError(f"proj_rgb expects {p.proj_rgb.shape[1]} channels, got {rgb_feat.shape[0]}")
    if p.proj_fem.shape[1] != fem_feat.shape[0]:
        raise BlockError(f"proj_fem expects {p.proj_fem.shape[1]} channels, got {fem_feat.shape[0]}")
    w_rgb, w_fem = p.weights
    return w_rgb * project(p.proj_rgb, rgb_feat) + w_fem * project(p.proj_fem, fem_feat)


# --------------------------------------------------------------------------
# ECA
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EcaConfig:
    gamma: int = 2
    b: int = 1

    def __post_init__(self):
        if self.gamma < 1:
            raise BlockError("gamma must be a positive integer")


def eca_kernel_size(channels: int, cfg: EcaConfig = EcaConfig()) -> int:
    """Odd 1-D kernel length adapted to the channel count.

    >>> eca_kernel_size(256)
    5
    """
    if channels < 1:
        raise BlockError("channels must be >= 1")
    t = int(math.floor(abs(math.log2(channels) / cfg.gamma + cfg.b / cfg.gamma)))
    k = t if t % 2 == 1 else t + 1
    return max(k, 1)


def channel_means(x: np.ndarray) -> np.ndarray:
    c = x.shape[0]
    flat = x.reshape(c, -1)
    n = flat.shape[1]
    return np.array([math.fsum(row) / n for row in flat])


def circular_conv1d(s: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Centered circular cross-correlation: ``a[c] = sum_j w[j] s[(c + j - k//2) mod C]``."""
    k = len(weights)
    half = k // 2
    a = np.zeros_like(s)
    for j in range(k):
        a += weights[j] * np.roll(s, half - j)
    return a


def eca_gains(x, weights, cfg: EcaConfig = EcaConfig()) -> np.ndarray:
    x = as_feature_map(x)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    k = eca_kernel_size(x.shape[0], cfg)
    if len(weights) != k:
        raise BlockError(f"ECA needs {k} weights for {x.shape[0]} channels, got {len(weights)}")
    return sigmoid(circular_conv1d(channel_means(x), weights))


def eca_forward(x, weights, cfg: EcaConfig = EcaConfig()) -> np.ndarray:
    """Rescale each channel of ``x`` by its attention gain in ``(0, 1)``."""
    x = as_feature_map(x)
    g = eca_gains(x, weights, cfg)
    return g[:, None, None] * x
