"""Tiny fixed-weight neural cells: 2-layer MLP and a GRU cell.

Weights are plain arrays, either user-supplied or drawn from a seeded
normal generator (scale 1/sqrt(fan_in)); nothing here is trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .matcore import relu, sigmoid


@dataclass(frozen=True)
class MlpWeights:
    """Two affine layers with a ReLU in between."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "MlpWeights":
        # exact identity despite the ReLU: x == relu(x) - relu(-x)
        eye = np.eye(dim)
        return cls(
            w1=np.concatenate([eye, -eye], axis=0),
            b1=np.zeros(2 * dim),
            w2=np.concatenate([eye, -eye], axis=1),
            b2=np.zeros(dim),
        )

    @classmethod
    def seeded(cls, rng: np.random.Generator, dim_in: int, hidden: int, dim_out: int) -> "MlpWeights":
        return cls(
            w1=rng.normal(scale=1.0 / np.sqrt(dim_in), size=(hidden, dim_in)),
            b1=np.zeros(hidden),
            w2=rng.normal(scale=1.0 / np.sqrt(hidden), size=(dim_out, hidden)),
            b2=np.zeros(dim_out),
        )


def mlp2(x: np.ndarray, w: MlpWeights) -> np.ndarray:
    """Apply the MLP column-wise; ``x`` is (dim_in,) or (dim_in, n)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if w.w1.shape[1] != x.shape[0]:
        raise ShapeError(f"mlp2: weight {w.w1.shape} vs input {x.shape}")
    h = relu(w.w1 @ x + w.b1[:, None])
    out = w.w2 @ h + w.b2[:, None]
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class GruWeights:
    """Gate (reset/update) and candidate weights for one GRU cell.

    Input size n, state size d: w_* are (d, n), u_* are (d, d).
    """

    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    @classmethod
    def zeros(cls, state: int, inp: int) -> "GruWeights":
        wn = np.zeros((state, inp))
        un = np.zeros((state, state))
        bn = np.zeros(state)
        return cls(wn, un, bn, wn.copy(), un.copy(), bn.copy(), wn.copy(), un.copy(), bn.copy())

    @classmethod
    def seeded(cls, rng: np.random.Generator, state: int, inp: int) -> "GruWeights":
        def w():
            return rng.normal(scale=1.0 / np.sqrt(inp), size=(state, inp))

        def u():
            return rng.normal(scale=1.0 / np.sqrt(state), size=(state, state))

        return cls(
            w_r=w(), u_r=u(), b_r=np.zeros(state),
            w_z=w(), u_z=u(), b_z=np.zeros(state),
            w_h=w(), u_h=u(), b_h=np.zeros(state),
        )


def gru_cell(z: np.ndarray, h: np.ndarray, w: GruWeights) -> np.ndarray:
    """One GRU step on column-stacked inputs ``z`` with states ``h``."""
    z = np.asarray(z, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    r = sigmoid(w.w_r @ z + w.u_r @ h + w.b_r[:, None])
    u = sigmoid(w.w_z @ z + w.u_z @ h + w.b_z[:, None])
    cand = np.tanh(w.w_h @ z + w.u_h @ (r * h) + w.b_h[:, None])
    return (1.0 - u) * h + u * cand
