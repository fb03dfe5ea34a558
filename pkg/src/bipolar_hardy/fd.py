"""Finite-difference operators used as an independent check on closed forms.

Nothing here knows the analytic gradient or potential of the extremal; the
operators only sample a scalar field through a vectorized callable
``f(X) -> values`` with ``X`` of shape ``(k, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import BipolarConfig, Geometry
from .potentials import v_kernel

RESIDUAL_FLOOR = 1e-30
# step for the supersolution residual, relative to the distance to the nearest pole
RESIDUAL_STEP = 1e-3


class StencilError(ValueError):
    """A stencil point fell inside a guard ball or produced a non-finite value."""


class DegenerateGradientError(ValueError):
    """|grad f| too small for the non-divergence form of the p-Laplacian."""


@dataclass(frozen=True)
class FDScheme:
    h: float = 1e-4
    richardson_levels: int = 2
    guard_points: tuple = field(default_factory=tuple)
    guard_radius: float = 0.0
    grad_floor: float = 1e-300

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")

    def steps(self):
        return [self.h / 2.0**k for k in range(self.richardson_levels)]

    def with_step(self, h: float) -> "FDScheme":
        return FDScheme(h, self.richardson_levels, self.guard_points,
                        self.guard_radius, self.grad_floor)


def scheme_for(cfg: BipolarConfig, h: float | None = None, levels: int = 2,
               guard: float = 0.0) -> FDScheme:
    """Default scheme: h = 1e-4 M, guard balls around a1, a2 and a."""
    h = 1e-4 * cfg.M if h is None else h
    pts = (tuple(cfg.a1), tuple(cfg.a2), tuple(cfg.a))
    return FDScheme(h, levels, pts, guard)


def richardson(values, order: int = 2, ratio: float = 2.0):
    """Eliminate h^order, h^(2 order), ... terms from a halving sequence."""
    vals = [np.asarray(v, dtype=float) for v in values]
    for j in range(1, len(vals)):
        fac = ratio ** (order * j)
        for k in range(len(vals) - 1, j - 1, -1):
            vals[k] = (fac * vals[k] - vals[k - 1]) / (fac - 1.0)
    return vals[-1]


def _call(f, X, scheme: FDScheme):
    if scheme.guard_points and scheme.guard_radius > 0:
        for pt in scheme.guard_points:
            d = np.linalg.norm(X - np.asarray(pt), axis=1)
            if np.any(d <= scheme.guard_radius):
                raise StencilError(
                    f"stencil point within {scheme.guard_radius:g} of {pt}")
    vals = np.asarray(f(X), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise StencilError("non-finite field value on stencil")
    return vals


def _derivatives(f, x, h, scheme, hessian: bool):
    x = np.asarray(x, dtype=float)
    n = x.size
    E = np.eye(n) * h
    pts = [x[None, :]]
    pts.append(x + E)
    pts.append(x - E)
    if hessian:
        iu, ju = np.triu_indices(n, 1)
        pts.append(x + E[iu] + E[ju])
        pts.append(x + E[iu] - E[ju])
        pts.append(x - E[iu] + E[ju])
        pts.append(x - E[iu] - E[ju])
    vals = _call(f, np.vstack(pts), scheme)
    f0 = vals[0]
    fp = vals[1:1 + n]
    fm = vals[1 + n:1 + 2 * n]
    grad = (fp - fm) / (2.0 * h)
    if not hessian:
        return grad, None
    m = iu.size
    o = 1 + 2 * n
    fpp, fpm, fmp, fmm = (vals[o + k * m:o + (k + 1) * m] for k in range(4))
    H = np.diag((fp - 2.0 * f0 + fm) / h**2)
    off = (fpp - fpm - fmp + fmm) / (4.0 * h**2)
    H[iu, ju] = off
    H[ju, iu] = off
    return grad, H


def fd_gradient(f, x, scheme: FDScheme) -> np.ndarray:
    """Central-difference gradient, Richardson-extrapolated over halved steps."""
    return richardson([_derivatives(f, x, h, scheme, False)[0] for h in scheme.steps()])


def fd_hessian(f, x, scheme: FDScheme) -> np.ndarray:
    return richardson([_derivatives(f, x, h, scheme, True)[1] for h in scheme.steps()])


def _plap(grad, H, p, floor):
    gn2 = float(grad @ grad)
    if gn2 <= floor**2:
        raise DegenerateGradientError(f"|grad f| = {np.sqrt(gn2):.3e}")
    return gn2 ** ((p - 2.0) / 2.0) * (np.trace(H) + (p - 2.0) * float(grad @ H @ grad) / gn2)


def fd_p_laplacian(f, x, p: float, scheme: FDScheme) -> float:
    """Delta_p f = |grad f|^(p-2) (Delta f + (p-2) <grad f, D^2 f grad f> / |grad f|^2).

    Gradient and Hessian are differenced and extrapolated separately, then
    combined; the expansion is only used where |grad f| > ``scheme.grad_floor``.
    """
    per_level = []
    for h in scheme.steps():
        g, H = _derivatives(f, x, h, scheme, True)
        per_level.append((g, H))
    g = richardson([a for a, _ in per_level])
    H = richardson([b for _, b in per_level])
    return _plap(g, H, p, scheme.grad_floor)


def phi_callable(cfg: BipolarConfig, alpha: float | None = None, lam: float = 1.0):
    """phi evaluated straight from the pole distances, for use as an FD input."""
    alpha = cfg.beta if alpha is None else alpha
    a1, a2 = np.asarray(cfg.a1), np.asarray(cfg.a2)

    def phi(X):
        r1 = np.linalg.norm(X - a1, axis=-1)
        r2 = np.linalg.norm(X - a2, axis=-1)
        return lam * (r1 * r2) ** alpha
    return phi


def local_scale(x, cfg: BipolarConfig) -> float:
    """Distance to the nearest pole; the length over which phi varies."""
    x = np.asarray(x, dtype=float)
    return float(min(np.linalg.norm(x - cfg.a1), np.linalg.norm(x - cfg.a2)))


def supersolution_residual(x, cfg: BipolarConfig, scheme: FDScheme | None = None,
                           lam: float = 1.0, relative_step: bool = True) -> float:
    """[-Delta_p phi - V phi^(p-1)] / (|V| phi^(p-1) + 1e-30) at ``x``.

    With ``relative_step`` the step is ``scheme.h`` times the distance to
    the nearest pole over M, which keeps far points out of the roundoff
    regime.
    """
    scheme = scheme_for(cfg, h=RESIDUAL_STEP * cfg.M) if scheme is None else scheme
    if relative_step:
        scheme = scheme.with_step(scheme.h * local_scale(x, cfg) / cfg.M)
    f = phi_callable(cfg, lam=lam)
    lap = fd_p_laplacian(f, x, cfg.p, scheme)
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    V = float(v_kernel(Geometry.from_points(x2, cfg), cfg)[0])
    phi = float(f(x2)[0])
    rhs = V * phi ** (cfg.p - 1.0)
    return (-lap - rhs) / (abs(V) * phi ** (cfg.p - 1.0) + RESIDUAL_FLOOR)
