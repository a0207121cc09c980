"""Class-token cross-attention pooling with multi-head splitting.

A single pooled vector attends to the patch features, per head, over a
number of iterations; the patch stream itself is held fixed, so this is
a pooler, not an encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .framework import AttentionMatrix, FeatureMap, PooledSet
from .matcore import Mat, col_softmax
from .nncells import MlpWeights, mlp2


def split_heads(a: Mat, m: int) -> list[Mat]:
    """Split rows into m contiguous blocks."""
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    if d % m != 0:
        raise ShapeError(f"split_heads: {m} does not divide dimension {d}")
    step = d // m
    return [a[i * step : (i + 1) * step] for i in range(m)]


def merge_heads(heads: list[Mat]) -> Mat:
    """Inverse of ``split_heads``: stack the row blocks back."""
    return np.concatenate(list(heads), axis=0)


@dataclass(frozen=True)
class VitIterWeights:
    """Weights of one pooling iteration."""

    w_q: Mat
    w_k: Mat
    w_v: Mat
    w_u: Mat
    mlp: MlpWeights

    @classmethod
    def identity(cls, d: int) -> "VitIterWeights":
        eye = np.eye(d)
        return cls(eye, eye.copy(), eye.copy(), eye.copy(), MlpWeights.identity(d))

    @classmethod
    def seeded(cls, rng: np.random.Generator, d: int) -> "VitIterWeights":
        scale = 1.0 / np.sqrt(d)

        def w():
            return rng.normal(scale=scale, size=(d, d))

        return cls(w_q=w(), w_k=w(), w_v=w(), w_u=w(),
                   mlp=MlpWeights.seeded(rng, d, d, d))


@dataclass(frozen=True)
class VitWeights:
    """Per-iteration weight stacks plus the initial pooled vector."""

    iters: tuple[VitIterWeights, ...]
    u0: np.ndarray

    @classmethod
    def seeded(cls, d: int, iters: int, seed: int = 0) -> "VitWeights":
        rng = np.random.default_rng(seed)
        return cls(
            iters=tuple(VitIterWeights.seeded(rng, d) for _ in range(iters)),
            u0=rng.normal(scale=1.0 / np.sqrt(d), size=d),
        )

    @classmethod
    def identity(cls, d: int, iters: int, u0=None) -> "VitWeights":
        u0 = np.zeros(d) if u0 is None else np.asarray(u0, dtype=np.float64)
        return cls(iters=tuple(VitIterWeights.identity(d) for _ in range(iters)), u0=u0)


def _cross_attention_step(
    x: Mat, u: np.ndarray, w: VitIterWeights, m: int
) -> tuple[np.ndarray, np.ndarray]:
    """One per-head cross-attention of u against x; returns (u_next, mean attention)."""
    d = x.shape[0]
    d_head = d // m
    scale = np.sqrt(d_head)
    q_heads = split_heads((w.w_q @ u)[:, None], m)
    k_heads = split_heads(w.w_k @ x, m)
    v_heads = split_heads(w.w_v @ x, m)
    attn_cols = []
    z_heads = []
    for qi, ki, vi in zip(q_heads, k_heads, v_heads):
        ai = col_softmax(ki.T @ qi, scale)
        attn_cols.append(ai[:, 0])
        z_heads.append(vi @ ai)
    z = merge_heads(z_heads)[:, 0]
    u_next = mlp2(w.w_u @ z, w.mlp)
    return u_next, np.mean(attn_cols, axis=0)


def vit_cls_pool(
    fm: FeatureMap, weights: VitWeights, m: int, iters: int, simplified: bool = True
) -> PooledSet:
    """Iterative class-token pooling: per-head scaled softmax attention of
    the pooled vector against the (fixed) patch features, merged and
    mapped through an output projection + MLP.

    Only the simplified form (no LayerNorm, no residuals) is provided.
    """
    if not simplified:
        raise ContractError("vit_cls_pool: only the simplified form is implemented")
    if iters < 1:
        raise ContractError(f"vit_cls_pool: iters must be >= 1, got {iters}")
    if len(weights.iters) < iters:
        raise ContractError(
            f"vit_cls_pool: {len(weights.iters)} weight sets for {iters} iterations"
        )
    d = fm.d
    if d % m != 0:
        raise ShapeError(f"vit_cls_pool: heads m={m} do not divide d={d}")
    u = np.asarray(weights.u0, dtype=np.float64)
    if u.shape != (d,):
        raise ShapeError(f"vit_cls_pool: u0 shape {u.shape} vs d={d}")
    attn = None
    for t in range(iters):
        u, attn = _cross_attention_step(fm.x, u, weights.iters[t], m)
    return PooledSet(u=u[:, None], attention=AttentionMatrix(attn[:, None], stochastic_cols=True))


def cait_class_attention(fm: FeatureMap, weights: VitWeights, m: int, iters: int) -> PooledSet:
    """Late class-attention stage: identical to ``vit_cls_pool`` since the
    patch stream is fixed by construction; meant for few (1-3) iterations."""
    return vit_cls_pool(fm, weights, m, iters, simplified=True)


def block_diagonal_query(q: np.ndarray, m: int) -> Mat:
    """Arrange the m head sub-queries as a (d, m) block-diagonal matrix."""
    heads = split_heads(np.asarray(q, dtype=np.float64)[:, None], m)
    d = q.shape[0]
    step = d // m
    out = np.zeros((d, m))
    for i, h in enumerate(heads):
        out[i * step : (i + 1) * step, i] = h[:, 0]
    return out
