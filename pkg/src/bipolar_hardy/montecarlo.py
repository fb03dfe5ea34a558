"""Importance-sampled Monte Carlo in full R^N, an oracle for the quadrature.

Nothing here uses the axisymmetric reduction: points are drawn in R^N from a
mixture of a power-law cloud around each pole, a uniform ball around a and a
Pareto tail, chosen so that the weight f/q stays bounded for integrands with
the model exponents of the energy densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import BipolarConfig, unit_ball_volume, unit_sphere_area


@dataclass(frozen=True)
class MCResult:
    value: float
    std_error: float
    samples: int


def _directions(rng, n, N):
    d = rng.standard_normal((n, N))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def mc_integrate(f, cfg: BipolarConfig, n: int, seed: int = 0, kappa: float = 0.25,
                 tail: float = 0.5, r_pole: float | None = None, r_ball: float | None = None,
                 weights=(0.3, 0.3, 0.25, 0.15)) -> MCResult:
    """Estimate int f over R^N; ``f`` maps an (n, N) array of points to values.

    kappa: radial mass of f near a pole ~ sigma^(kappa-1) d sigma.
    tail:  radial mass of f at infinity ~ s^(-1-tail) d s.
    """
    N = cfg.N
    r_pole = 0.5 * cfg.M if r_pole is None else r_pole
    r_ball = 2.0 * cfg.M if r_ball is None else r_ball
    rng = np.random.default_rng(seed)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    comp = rng.choice(4, size=n, p=w)
    S = unit_sphere_area(N)
    X = np.empty((n, N))
    centers = (cfg.a1, cfg.a2)
    for k in (0, 1):
        m = comp == k
        sig = r_pole * rng.uniform(size=m.sum()) ** (1.0 / kappa)
        X[m] = centers[k] + sig[:, None] * _directions(rng, m.sum(), N)
    m = comp == 2
    s = r_ball * rng.uniform(size=m.sum()) ** (1.0 / N)
    X[m] = cfg.a + s[:, None] * _directions(rng, m.sum(), N)
    m = comp == 3
    s = r_ball * rng.uniform(size=m.sum()) ** (-1.0 / tail)
    X[m] = cfg.a + s[:, None] * _directions(rng, m.sum(), N)

    def pole_density(c):
        sig = np.linalg.norm(X - c, axis=1)
        q = kappa * sig ** (kappa - 1.0) / r_pole**kappa / (S * sig ** (N - 1))
        return np.where(sig < r_pole, q, 0.0)

    sa = np.linalg.norm(X - cfg.a, axis=1)
    q_ball = np.where(sa < r_ball, 1.0 / (unit_ball_volume(N) * r_ball**N), 0.0)
    q_tail = np.where(sa >= r_ball, tail * r_ball**tail * sa ** (-1.0 - tail) / (S * sa ** (N - 1)), 0.0)
    q = w[0] * pole_density(cfg.a1) + w[1] * pole_density(cfg.a2) + w[2] * q_ball + w[3] * q_tail
    vals = np.asarray(f(X), dtype=float) / q
    return MCResult(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), n)


def grad_phi_norm_points(X, cfg: BipolarConfig, alpha: float | None = None) -> np.ndarray:
    """|grad (r1 r2)^alpha| from the vector formula, rows of X."""
    b = cfg.beta if alpha is None else alpha
    d1 = X - cfg.a1
    d2 = X - cfg.a2
    r1 = np.linalg.norm(d1, axis=1)
    r2 = np.linalg.norm(d2, axis=1)
    vec = (r2**2)[:, None] * d1 + (r1**2)[:, None] * d2
    return np.abs(b) * r1 ** (b - 2.0) * r2 ** (b - 2.0) * np.linalg.norm(vec, axis=1)
