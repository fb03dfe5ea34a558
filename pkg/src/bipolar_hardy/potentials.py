"""The bipolar potentials V1, V2, V = mu1 V1 + mu2 V2 and related quantities.

The bracket |x-a1|^2 |x-a2|^2 - ((x-a1).(x-a2))^2 appearing in V2 equals
|(x-a1) x (a2-a1)|^2 = M^2 rho^2 (Lagrange's identity), which is what the
kernels use: it never cancels, even next to a pole or far from both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import BipolarConfig, Geometry

GUARD = 1e-12  # rejection radius around singular points, in units of M


class PoleProximityError(ValueError):
    """Evaluation requested at (or within GUARD*M of) a singular point."""

    def __init__(self, which: str, distance: float):
        super().__init__(f"x is {distance:.3e} from singular point {which}")
        self.which = which
        self.distance = distance


@dataclass(frozen=True)
class FieldSample:
    value: float
    nearest_singularity: str  # pole1 | pole2 | midpoint | none
    distance_to_it: float


# -- vectorized kernels --------------------------------------------------------

def v1_kernel(g: Geometry, cfg: BipolarConfig) -> np.ndarray:
    p = cfg.p
    return cfg.M**2 * g.rm ** (p - 2.0) / (g.r1**p * g.r2**p)


def v2_kernel(g: Geometry, cfg: BipolarConfig) -> np.ndarray:
    p = cfg.p
    with np.errstate(invalid="ignore", divide="ignore"):
        sin2 = np.where(g.rm > 0, (g.rho / np.where(g.rm > 0, g.rm, 1.0)) ** 2, 0.0)
        out = cfg.M**2 * g.rm ** (p - 2.0) * sin2 / (g.r1**p * g.r2**p)
    if p >= 4.0:
        out = np.where(g.rm > 0, out, 0.0)
    return out


def v_kernel(g: Geometry, cfg: BipolarConfig) -> np.ndarray:
    out = cfg.mu1 * v1_kernel(g, cfg)
    if cfg.mu2 != 0.0:
        out = out + cfg.mu2 * v2_kernel(g, cfg)
    return out


KERNELS = {"V": v_kernel, "V1": v1_kernel, "V2": v2_kernel}


def potential(name: str):
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(KERNELS)}")


def appendix_kernel(g: Geometry, cfg: BipolarConfig) -> np.ndarray:
    p, N = cfg.p, cfg.N
    k = (p - 1.0) / 16.0 * ((N - p) / (p - 1.0)) ** p
    diff = (g.r1 - g.r2) * (g.r1 + g.r2)
    return k * g.rm ** (p - 4.0) * diff**2 / (g.r1**p * g.r2**p)


# -- pointwise evaluators ------------------------------------------------------

def _singular_set(cfg: BipolarConfig, midpoint_singular: bool):
    pts = [("pole1", cfg.a1), ("pole2", cfg.a2)]
    if midpoint_singular:
        pts.append(("midpoint", cfg.a))
    return pts


def _locate(x, cfg: BipolarConfig, midpoint_singular: bool):
    x = np.asarray(x, dtype=float)
    best, dist = "none", math.inf
    for name, pt in _singular_set(cfg, midpoint_singular):
        d = float(np.linalg.norm(x - pt))
        if d <= GUARD * cfg.M:
            raise PoleProximityError(name, d)
        if d < dist:
            best, dist = name, d
    if dist > 0.25 * cfg.M:
        best = "none"
    return best, dist


def _sample(kernel, x, cfg, midpoint_singular) -> FieldSample:
    which, dist = _locate(x, cfg, midpoint_singular)
    value = float(kernel(Geometry.from_points(x, cfg), cfg)[0])
    return FieldSample(value, which, dist)


def eval_V1(x, cfg: BipolarConfig) -> FieldSample:
    return _sample(v1_kernel, x, cfg, cfg.p < 2.0)


def eval_V2(x, cfg: BipolarConfig) -> FieldSample:
    return _sample(v2_kernel, x, cfg, cfg.p < 4.0)


def eval_V(x, cfg: BipolarConfig) -> FieldSample:
    return _sample(v_kernel, x, cfg, cfg.p < 4.0)


def appendix_lower_bound(x, cfg: BipolarConfig) -> float:
    """Cauchy-Schwarz lower bound on V, valid for 1 < p < 2."""
    if not cfg.p < 2.0:
        raise ValueError(f"lower bound holds only for 1 < p < 2, got p={cfg.p}")
    _locate(x, cfg, True)
    return float(appendix_kernel(Geometry.from_points(x, cfg), cfg)[0])


# -- asymptotics ---------------------------------------------------------------

REGIMES = ("pole", "midpoint", "infinity")


def asymptotic_limit(cfg: BipolarConfig, regime: str) -> float:
    p, M = cfg.p, cfg.M
    if regime == "pole":
        return 2.0 ** (2.0 - p)
    if regime == "midpoint":
        return 4.0**p * M ** (2.0 * (1.0 - p))
    if regime == "infinity":
        return M**2
    raise ValueError(f"unknown regime {regime!r}")


def asymptotic_normalizer(x, cfg: BipolarConfig, regime: str) -> float:
    """V1 rescaled by the power that makes it tend to a constant in ``regime``.

    The pole regime uses whichever pole is closer to ``x``.
    """
    if not cfg.p > 2.0:
        raise ValueError("normalizations are stated for p > 2")
    x = np.asarray(x, dtype=float)
    v1 = eval_V1(x, cfg).value
    if regime == "pole":
        d = min(np.linalg.norm(x - cfg.a1), np.linalg.norm(x - cfg.a2))
        return float(d**cfg.p * v1)
    if regime == "midpoint":
        return float(np.linalg.norm(x - cfg.a) ** (2.0 - cfg.p) * v1)
    if regime == "infinity":
        return float(np.linalg.norm(x) ** (cfg.p + 2.0) * v1)
    raise ValueError(f"unknown regime {regime!r}")


# -- domination of mu2 V2 by V1 near the poles ---------------------------------

def margin_kernel(g: Geometry, delta: float, cfg: BipolarConfig) -> np.ndarray:
    return cfg.mu2 * v2_kernel(g, cfg) - 0.5 * delta * v1_kernel(g, cfg)


def prop41_margin(x, delta: float, cfg: BipolarConfig) -> float:
    if not delta > 0:
        raise ValueError("delta must be positive")
    _locate(x, cfg, True)
    return float(margin_kernel(Geometry.from_points(x, cfg), delta, cfg)[0])


class RadiusSearchError(RuntimeError):
    def __init__(self, radius, sample):
        super().__init__(
            f"no admissible radius: margin >= 0 already at r={radius:.3e}, "
            f"sample (t, rho)={sample}")
        self.radius = radius
        self.sample = sample


def _ball_violation(r: float, delta: float, cfg: BipolarConfig, samples: int):
    sig = r * np.arange(1, samples + 1) / samples
    psi = np.linspace(0.0, math.pi, samples + 1)
    S, P = np.meshgrid(sig, psi, indexing="ij")
    for center in ("pole1", "pole2"):
        g = Geometry.polar(center, S.ravel(), P.ravel(), cfg)
        m = margin_kernel(g, delta, cfg)
        bad = np.flatnonzero(~(m < 0))
        if bad.size:
            k = bad[np.argmax(m[bad])]
            return (float(g.tm[k]), float(g.rho[k]))
    return None


def quartic_condition(r: float, delta: float, cfg: BipolarConfig) -> bool:
    """Worst-case (alpha^2 = 0) form: 8 mu2 r^2 (r+M)^2 < delta M^4."""
    M = cfg.M
    return 8.0 * cfg.mu2 * r**2 * (r + M) ** 2 < delta * M**4


def find_r0(delta: float, cfg: BipolarConfig, samples: int = 64,
            r_max: float | None = None, iterations: int = 60) -> float:
    """Largest radius on a bisection grid where mu2 V2 - (delta/2) V1 < 0.

    A radius qualifies when the worst-case quartic condition holds and the
    margin is negative on a (samples x samples) polar lattice of both balls.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    r_max = 0.25 * cfg.M if r_max is None else float(r_max)

    def ok(r):
        return quartic_condition(r, delta, cfg) and \
            _ball_violation(r, delta, cfg, samples) is None

    if ok(r_max):
        return r_max
    lo, hi = r_max * 2.0**-iterations, r_max
    if not ok(lo):
        bad = _ball_violation(lo, delta, cfg, samples)
        raise RadiusSearchError(lo, bad)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
