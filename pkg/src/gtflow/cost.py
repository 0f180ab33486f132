"""Local cost functions: value / gradient / Hessian per agent.

A cost model is a sequence of per-agent handles, each exposing ``value``,
``gradient`` and ``hessian`` at a point in R^m. Everything downstream
(the dynamics engine, the spectral analyzer) consumes only that interface.

The smoothed hinge is evaluated in the overflow-safe branchless form so the
exponential never overflows; the exponential-loss inaccuracy this guards
against is a real failure mode at large margins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "smoothed_hinge",
    "QuadraticCost",
    "SvmHingeCost",
    "HessianAggregate",
    "aggregate_hessian",
    "global_cost",
    "sum_gradient",
    "stack_states",
    "split_states",
]


def smoothed_hinge(z, mu: float):
    """Smoothed max(z, 0): L = log(1 + exp(mu z)) / mu, with L' and L''.

    Returns (L, L', L'') evaluated componentwise. L' is the logistic sigmoid
    of mu*z and L'' = mu * L' * (1 - L'). Stable for |mu z| up to 1e6 and
    beyond; the smoothing gap L - max(z, 0) lies in (0, log 2 / mu].
    """
    if mu <= 0:
        raise ValueError("smoothing parameter mu must be positive")
    t = np.asarray(mu * np.asarray(z, dtype=float))
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    val = (np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))) / mu
    s = np.empty_like(t)
    pos = t >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    s[~pos] = et / (1.0 + et)
    curv = mu * s * (1.0 - s)
    if scalar:
        return float(val[0]), float(s[0]), float(curv[0])
    return val, s, curv


@dataclass(frozen=True)
class QuadraticCost:
    """f(x) = 0.5 (x - b)^T Q (x - b) with constant PD curvature Q."""

    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if Q.shape != (b.size, b.size):
            raise ValueError("Q must be square with side len(b)")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.b.size

    def value(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.b
        return 0.5 * float(d @ self.Q @ d)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ (np.asarray(x, dtype=float) - self.b)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.Q


class SvmHingeCost:
    """Soft-margin classifier cost on one agent's data shard.

    Decision variable x = [w; nu] in R^m splits into the hyperplane normal w
    (on already feature-mapped points) and the bias nu. The cost is

        w.w  +  C * sum_j L(1 - l_j (w.chi_j - nu), mu)  +  eps_nu * nu^2

    with L the smoothed hinge. The tiny default bias regularizer keeps the
    Hessian positive-definite even on degenerate shards (single label, rank
    deficient features), where the plain cost has no curvature in nu.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray,
                 C: float = 1.0, mu: float = 2.0, eps_nu: float = 1e-6):
        features = np.atleast_2d(np.asarray(features, dtype=float))
        labels = np.asarray(labels, dtype=float).ravel()
        if features.shape[0] != labels.size:
            raise ValueError("one label per data point required")
        if labels.size and not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if C <= 0 or mu <= 0 or eps_nu < 0:
            raise ValueError("need C > 0, mu > 0, eps_nu >= 0")
        self.features = features
        self.labels = labels
        self.C = C
        self.mu = mu
        self.eps_nu = eps_nu
        self.m = features.shape[1] + 1
        features.flags.writeable = False
        labels.flags.writeable = False

    def _margins(self, x: np.ndarray) -> np.ndarray:
        w, nu = x[:-1], x[-1]
        return 1.0 - self.labels * (self.features @ w - nu)

    def value(self, x: np.ndarray) -> float:
        x = self._check(x)
        w, nu = x[:-1], x[-1]
        L, _, _ = smoothed_hinge(self._margins(x), self.mu)
        return float(w @ w + self.C * np.sum(L) + self.eps_nu * nu * nu)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        w, nu = x[:-1], x[-1]
        _, s, _ = smoothed_hinge(self._margins(x), self.mu)
        gw = 2.0 * w + self.C * ((-self.labels * s) @ self.features)
        gnu = self.C * float(self.labels @ s) + 2.0 * self.eps_nu * nu
        return np.concatenate([gw, [gnu]])

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        _, _, curv = smoothed_hinge(self._margins(x), self.mu)
        # dz_j/dx = [-l_j chi_j; l_j]
        U = np.concatenate([-self.labels[:, None] * self.features,
                            self.labels[:, None]], axis=1)
        H = self.C * (U.T * curv) @ U
        H[:-1, :-1] += 2.0 * np.eye(self.m - 1)
        H[-1, -1] += 2.0 * self.eps_nu
        return H

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise ValueError(f"decision variable must have shape ({self.m},), got {x.shape}")
        return x


@dataclass(frozen=True)
class HessianAggregate:
    """Block-diagonal Hessian of the stacked cost plus its infinity norm.

    ``blocks[i]`` is agent i's m-by-m Hessian; ``infinity_norm`` is the max
    absolute row sum over the block diagonal, the curvature constant used by
    every step-size bound. The dense nm-by-nm matrix is never materialized
    here; callers that need it assemble it from the blocks.
    """

    blocks: tuple[np.ndarray, ...]
    infinity_norm: float

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def m(self) -> int:
        return self.blocks[0].shape[0]

    def dense(self) -> np.ndarray:
        n, m = self.n, self.m
        H = np.zeros((n * m, n * m))
        for i, blk in enumerate(self.blocks):
            H[i * m:(i + 1) * m, i * m:(i + 1) * m] = blk
        return H

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh(b).min()) for b in self.blocks)


def aggregate_hessian(costs, x_stack: np.ndarray) -> HessianAggregate:
    """Per-agent Hessians at the stacked state (n rows of length m)."""
    X = np.atleast_2d(np.asarray(x_stack, dtype=float))
    if X.shape[0] != len(costs):
        raise ValueError("one state row per agent required")
    blocks = tuple(np.atleast_2d(c.hessian(X[i])) for i, c in enumerate(costs))
    gamma = max(float(np.abs(b).sum(axis=1).max()) for b in blocks)
    return HessianAggregate(blocks, gamma)


def global_cost(costs, x_stack: np.ndarray) -> float:
    """F(x) = sum_i f_i(x_i)."""
    X = np.atleast_2d(np.asarray(x_stack, dtype=float))
    return float(sum(c.value(X[i]) for i, c in enumerate(costs)))


def sum_gradient(costs, x_stack: np.ndarray) -> np.ndarray:
    """sum_i grad f_i(x_i), the optimality residual tracked by the dynamics."""
    X = np.atleast_2d(np.asarray(x_stack, dtype=float))
    out = np.zeros(X.shape[1])
    for i, c in enumerate(costs):
        out += c.gradient(X[i])
    return out


def stack_states(X: np.ndarray) -> np.ndarray:
    """(n, m) agent-major block vector of length n*m."""
    return np.asarray(X, dtype=float).ravel()


def split_states(x: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(n, -1)
