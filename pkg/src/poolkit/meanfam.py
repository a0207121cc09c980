"""The pooling-operation family: power means, their log branch, and LSE.

The scalar function ``f(x) = x**gamma`` (``ln x`` on the log branch)
turns an attention-weighted sum into a generalized mean:
``u = (v**gamma @ a) ** (1/gamma)``.  gamma relates to the alpha
parameterization by ``gamma = (1 - alpha) / 2``; alpha = -3, -1, 1, 3
give the RMS, arithmetic, geometric and harmonic means, and the
gamma -> +/-inf limits approach max and min.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

CLAMP_FLOOR = 1e-12

# Default exponents, by the family of network the features came from.
GAMMA_CONV_DEFAULT = 2.0
GAMMA_TRANSFORMER_DEFAULT = 1.25


@dataclass(frozen=True)
class AlphaParam:
    """Exponent parameter, carrying both alpha and gamma = (1-alpha)/2."""

    alpha: float

    @property
    def gamma(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @property
    def log_branch(self) -> bool:
        return self.alpha == 1.0

    @classmethod
    def from_gamma(cls, gamma: float) -> "AlphaParam":
        return cls(alpha=1.0 - 2.0 * gamma)

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ContractError(f"AlphaParam: alpha must be finite, got {self.alpha}")
        if not self.log_branch and abs(self.gamma) < 1e-9:
            raise ContractError(
                f"AlphaParam: gamma={self.gamma} too close to 0 outside the log branch"
            )


def _clamped(v: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=np.float64), CLAMP_FLOOR)


def f_alpha(x, alpha: AlphaParam):
    """The scalar pooling function, elementwise on clamped nonnegative input."""
    xc = _clamped(x)
    if alpha.log_branch:
        return np.log(xc)
    return xc**alpha.gamma


def f_alpha_inv(y, alpha: AlphaParam):
    """Inverse of ``f_alpha``."""
    y = np.asarray(y, dtype=np.float64)
    if alpha.log_branch:
        return np.exp(y)
    return y ** (1.0 / alpha.gamma)


def weighted_generalized_mean(v, a, alpha: AlphaParam) -> np.ndarray:
    """Attention-weighted generalized mean ``f^-1(f(V) A)``.

    ``v`` is d x p nonnegative, ``a`` is p x k with stochastic columns
    for mean semantics.  Large |gamma| is handled by factoring out the
    row extreme so no intermediate power overflows.
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if a.ndim == 1:
        a = a[:, None]
    if np.any(v < 0):
        raise ContractError("weighted_generalized_mean: negative values")
    vc = _clamped(v)
    if alpha.log_branch:
        return np.exp(np.log(vc) @ a)
    g = alpha.gamma
    # Factor out the row max (g > 0) or min (g < 0): every ratio**g <= 1.
    m = vc.max(axis=1, keepdims=True) if g > 0 else vc.min(axis=1, keepdims=True)
    inner = ((vc / m) ** g) @ a
    return m * inner ** (1.0 / g)


def approx_extreme(v, gamma_large: float, sign: int = 1) -> np.ndarray:
    """Uniform power mean with a large exponent, approaching max (or min).

    ``sign=+1`` approaches the row max as gamma_large grows, ``sign=-1``
    the row min.  Monotone in gamma_large by the power-mean inequality.
    """
    if gamma_large < 10:
        raise ContractError(f"approx_extreme: gamma_large must be >= 10, got {gamma_large}")
    if sign not in (1, -1):
        raise ContractError(f"approx_extreme: sign must be +-1, got {sign}")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    p = v.shape[1]
    a = np.full((p, 1), 1.0 / p)
    return weighted_generalized_mean(v, a, AlphaParam.from_gamma(sign * gamma_large))


def lse_pool(v, a, r: float) -> np.ndarray:
    """Log-sum-exp pooling ``(1/r) ln(exp(r V) a)`` with max factoring."""
    if abs(r) < 1e-9:
        raise ContractError(f"lse_pool: |r| must be >= 1e-9, got {r}")
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if a.ndim == 1:
        a = a[:, None]
    rv = r * v
    c = rv.max(axis=1, keepdims=True)
    return (c + np.log(np.exp(rv - c) @ a)) / r
