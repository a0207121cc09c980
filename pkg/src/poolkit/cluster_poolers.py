"""Poolers producing k > 1 vectors: entropic transport, Lloyd k-means in
matrix form, and slot-style iterative cross-attention."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, ConvergenceError, DegenerateMassError, NumericError
from .framework import AttentionMatrix, FeatureMap, PooledSet
from .matcore import Mat, col_softmax, jacobi_eigh, layernorm_cols
from .nncells import GruWeights, MlpWeights, gru_cell, mlp2


# --- Sinkhorn / optimal transport -----------------------------------------

@dataclass(frozen=True)
class SinkhornParams:
    epsilon: float
    tol: float = 1e-9
    max_iter: int = 1000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ContractError(f"SinkhornParams: epsilon must be > 0, got {self.epsilon}")


def sinkhorn(cost: Mat, params: SinkhornParams) -> Mat:
    """Entropic-regularized transport plan between uniform marginals.

    Alternating row/column scaling of exp(-cost/epsilon) until both
    marginals (rows sum to 1/p, columns to 1/k) are within tolerance.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if not np.all(np.isfinite(cost)):
        raise NumericError("sinkhorn: non-finite cost")
    p, k = cost.shape
    kernel = np.exp(-cost / params.epsilon)
    if kernel.max() < 1e-300 or np.any(kernel.sum(axis=1) == 0) or np.any(
        kernel.sum(axis=0) == 0
    ):
        raise NumericError(
            f"sinkhorn: kernel underflow, epsilon={params.epsilon} too small"
        )
    row_marg = 1.0 / p
    col_marg = 1.0 / k
    plan = kernel / kernel.sum()
    for _ in range(params.max_iter):
        plan = plan * (row_marg / plan.sum(axis=1, keepdims=True))
        plan = plan * (col_marg / plan.sum(axis=0, keepdims=True))
        row_res = np.max(np.abs(plan.sum(axis=1) - row_marg))
        col_res = np.max(np.abs(plan.sum(axis=0) - col_marg))
        if max(row_res, col_res) <= params.tol:
            return plan
    raise ConvergenceError(
        f"sinkhorn: residual {max(row_res, col_res):.3e} after "
        f"{params.max_iter} iterations (tol {params.tol:g})"
    )


def _sq_distances(x: Mat, u: Mat) -> Mat:
    """(p, k) squared Euclidean distances between columns of x and u."""
    x2 = np.sum(x**2, axis=0)[:, None]
    u2 = np.sum(u**2, axis=0)[None, :]
    d = x2 + u2 - 2.0 * (x.T @ u)
    return np.maximum(d, 0.0)


def nystrom_map(anchors: Mat, sigma_rbf: float) -> "NystromMap":
    return NystromMap(anchors=np.asarray(anchors, dtype=np.float64), sigma=sigma_rbf)


@dataclass(frozen=True)
class NystromMap:
    """Gaussian-kernel feature map anchored at k reference columns:
    psi(x) = M^{-1/2} kappa(anchors, x), M = kappa(anchors, anchors)."""

    anchors: Mat
    sigma: float

    def __call__(self, x: Mat) -> Mat:
        m = self._kernel(self.anchors)
        lam, vecs = jacobi_eigh(m)
        lam = np.maximum(lam, 1e-10)
        m_inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(lam)) @ vecs.T
        return m_inv_sqrt @ self._kernel(x)

    def _kernel(self, x: Mat) -> Mat:
        d = _sq_distances(x, self.anchors).T  # (k, n)
        return np.exp(-d / (2.0 * self.sigma**2))


def otk_pool(
    fm: FeatureMap,
    anchors: Mat,
    epsilon: float,
    psi: Optional[NystromMap] = None,
    params: Optional[SinkhornParams] = None,
) -> PooledSet:
    """Transport-plan pooling against anchor columns.

    Cost is squared distance of features to anchors; the plan carries
    mass 1/k per column, so the output is rescaled by k to give each
    column mean semantics (the k=1 case then coincides with plain GAP).
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim == 1:
        anchors = anchors[None, :]
    k = anchors.shape[1]
    if params is None:
        params = SinkhornParams(epsilon=epsilon)
    cost = _sq_distances(fm.x, anchors)
    # Subtracting row/column minima rescales the kernel by diagonal factors,
    # which leaves the balanced plan unchanged while keeping exp(-cost/eps)
    # away from underflow when distances are large.
    cost = cost - cost.min(axis=1, keepdims=True)
    cost = cost - cost.min(axis=0, keepdims=True)
    plan = sinkhorn(cost, params)
    feats = fm.x if psi is None else psi(fm.x)
    u = (feats @ plan) * k
    return PooledSet(u=u, attention=AttentionMatrix(plan, stochastic_cols=False))


# --- k-means ---------------------------------------------------------------

def kmeans_distortion(x: Mat, centroids: Mat) -> float:
    """Sum over columns of x of the squared distance to the nearest centroid."""
    return float(_sq_distances(x, centroids).min(axis=1).sum())


def lloyd_step(x: Mat, centroids: Mat) -> tuple[Mat, Mat]:
    """One Lloyd iteration in matrix form; returns (new centroids, assignment).

    Ties go to the lowest centroid index; an empty cluster keeps its
    previous centroid.
    """
    p = x.shape[1]
    k = centroids.shape[1]
    d = _sq_distances(x, centroids)
    idx = np.argmin(d, axis=1)
    m = np.zeros((p, k))
    m[np.arange(p), idx] = 1.0
    mass = m.sum(axis=0)
    empty = mass == 0
    a = m / np.where(empty, 1.0, mass)
    u = x @ a
    u[:, empty] = centroids[:, empty]
    return u, a


def kmeans_pool(fm: FeatureMap, k: int, iters: int, seed: int = 0) -> PooledSet:
    """Seeded k-means: init from k distinct data columns, run exactly
    ``iters`` Lloyd steps, return centroids plus the final assignment."""
    if k > fm.p:
        raise ContractError(f"kmeans_pool: k={k} > p={fm.p}")
    if iters < 1:
        raise ContractError(f"kmeans_pool: iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(fm.p, size=k, replace=False)
    u = fm.x[:, idx].copy()
    a = None
    for _ in range(iters):
        u, a = lloyd_step(fm.x, u)
    return PooledSet(u=u, attention=AttentionMatrix(a, stochastic_cols=False))


# --- slot attention --------------------------------------------------------

@dataclass(frozen=True)
class SlotWeights:
    """Projection, recurrent and MLP weights plus the slot-init statistics."""

    w_q: Mat
    w_k: Mat
    w_v: Mat
    gru: GruWeights
    mlp: MlpWeights
    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def seeded(cls, d: int, seed: int = 0, hidden: Optional[int] = None) -> "SlotWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(d)
        hidden = d if hidden is None else hidden
        return cls(
            w_q=rng.normal(scale=scale, size=(d, d)),
            w_k=rng.normal(scale=scale, size=(d, d)),
            w_v=rng.normal(scale=scale, size=(d, d)),
            gru=GruWeights.seeded(rng, d, d),
            mlp=MlpWeights.seeded(rng, d, hidden, d),
            mu=rng.normal(size=d),
            sigma=np.abs(rng.normal(size=d)) + 0.1,
        )


def slot_pool(
    fm: FeatureMap,
    k: int,
    iters: int,
    weights: SlotWeights,
    seed: int = 0,
    simplified: bool = False,
    use_layernorm: bool = True,
    ln_eps: float = 1e-5,
) -> PooledSet:
    """Iterative soft-clustering: k slot vectors compete for locations.

    Full mode normalizes the column softmax over rows and updates slots
    through a GRU + residual MLP; simplified mode uses the plain column
    softmax and takes the weighted value average as the new slots.
    """
    d = fm.d
    n = weights.w_k.shape[0]
    rng = np.random.default_rng(seed)
    u = weights.mu[:, None] + weights.sigma[:, None] * rng.standard_normal(
        (weights.mu.size, k)
    )
    ln = (lambda m: layernorm_cols(m, ln_eps)) if use_layernorm else (lambda m: m)
    x_n = ln(fm.x)
    keys = weights.w_k @ x_n
    values = weights.w_v @ x_n
    a = None
    for _ in range(iters):
        q = weights.w_q @ ln(u)
        s = keys.T @ q
        if simplified:
            a = col_softmax(s, np.sqrt(d))
            stochastic = True
        else:
            soft = col_softmax(s, np.sqrt(n))
            row_mass = soft.sum(axis=1)
            dead = np.flatnonzero(row_mass == 0)
            if dead.size:
                raise DegenerateMassError(f"slot_pool: zero-mass row {dead[0]}")
            a = soft / row_mass[:, None]
            stochastic = False
        z = values @ a
        if simplified:
            u = z
        else:
            g = gru_cell(z, u, weights.gru)
            u = g + mlp2(ln(g), weights.mlp)
    return PooledSet(u=u, attention=AttentionMatrix(a, stochastic_cols=stochastic))
