"""Channel / spatial re-weighting blocks recast as poolers.

Both methods gate the features with sigmoid outputs and are finished
off by global average pooling, which turns them into single-vector
pooling operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, ShapeError
from .framework import AttentionMatrix, FeatureMap, PooledSet
from .matcore import Mat, conv2d_same, relu, sigmoid


@dataclass(frozen=True)
class SeWeights:
    """Bottleneck gating MLP: d -> d/r -> d."""

    w1: Mat
    w2: Mat
    reduction: int = 4

    @classmethod
    def seeded(cls, d: int, reduction: int = 4, seed: int = 0) -> "SeWeights":
        if d % reduction != 0:
            raise ContractError(f"SeWeights: d={d} not divisible by reduction={reduction}")
        rng = np.random.default_rng(seed)
        hidden = d // reduction
        return cls(
            w1=rng.normal(scale=1.0 / np.sqrt(d), size=(hidden, d)),
            w2=rng.normal(scale=1.0 / np.sqrt(hidden), size=(d, hidden)),
            reduction=reduction,
        )

    @classmethod
    def zeros(cls, d: int, reduction: int = 4) -> "SeWeights":
        return cls(w1=np.zeros((d // reduction, d)), w2=np.zeros((d, d // reduction)),
                   reduction=reduction)


def _gate(u: np.ndarray, w: SeWeights) -> np.ndarray:
    """sigmoid(w2 relu(w1 u)), column-wise."""
    u = np.asarray(u, dtype=np.float64)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[:, None]
    if w.w1.shape[1] != u.shape[0]:
        raise ShapeError(f"SeWeights: w1 {w.w1.shape} vs input {u.shape}")
    out = w.w2 @ relu(w.w1 @ u)
    return out[:, 0] if squeeze else out


def se_pool(fm: FeatureMap, w: SeWeights) -> PooledSet:
    """Channel gating from the global average, then average pooling:
    z = q * gap(X) with q = sigmoid(mlp(gap(X)))."""
    u0 = fm.x.mean(axis=1)
    q = sigmoid(_gate(u0, w))
    z = q * u0
    p = fm.p
    uniform = np.full((p, 1), 1.0 / p)
    return PooledSet(u=z[:, None], attention=AttentionMatrix(uniform, stochastic_cols=True))


@dataclass(frozen=True)
class CbamWeights:
    """Channel bottleneck MLP plus a 7x7 two-channel spatial kernel."""

    channel_mlp: SeWeights
    conv7: Mat  # (2, 7, 7)
    conv_bias: float = 0.0

    def __post_init__(self):
        k = np.asarray(self.conv7, dtype=np.float64)
        if k.shape != (2, 7, 7):
            raise ShapeError(f"CbamWeights: conv7 must be (2, 7, 7), got {k.shape}")
        object.__setattr__(self, "conv7", k)

    @classmethod
    def seeded(cls, d: int, reduction: int = 4, seed: int = 0) -> "CbamWeights":
        rng = np.random.default_rng(seed)
        return cls(
            channel_mlp=SeWeights.seeded(d, reduction, seed),
            conv7=rng.normal(scale=1.0 / 7.0, size=(2, 7, 7)),
            conv_bias=0.0,
        )

    @classmethod
    def zeros(cls, d: int, reduction: int = 4) -> "CbamWeights":
        return cls(channel_mlp=SeWeights.zeros(d, reduction), conv7=np.zeros((2, 7, 7)))


def cbam_pool(fm: FeatureMap, w: CbamWeights, simplified: bool = False) -> PooledSet:
    """Channel gating, then spatial gating by a 7x7 convolution, then
    average pooling: z = V a / p.

    Full mode stacks [avg, max] statistics for both gates; simplified
    mode keeps average only, where the spatial statistic collapses to
    the dot-product similarity X^T q / d.
    """
    x = fm.x
    d, p = x.shape
    if simplified:
        q = sigmoid(_gate(x.mean(axis=1), w.channel_mlp))
    else:
        u0 = np.stack([x.mean(axis=1), x.max(axis=1)], axis=1)  # (d, 2)
        q = sigmoid(_gate(u0, w.channel_mlp).mean(axis=1))
    v = q[:, None] * x

    if simplified:
        s = (x.T @ q / d)[:, None]  # (p, 1)
        kernels = w.conv7[:1]
    else:
        s = np.stack([v.mean(axis=0), v.max(axis=0)], axis=1)  # (p, 2)
        kernels = w.conv7

    acc = np.zeros((fm.height, fm.width))
    for c in range(s.shape[1]):
        acc += conv2d_same(s[:, c].reshape(fm.height, fm.width), kernels[c])
    a = sigmoid(acc + w.conv_bias).reshape(-1)

    z = (v @ a) / p
    return PooledSet(u=z[:, None], attention=AttentionMatrix(a[:, None], stochastic_cols=False))
