"""Rayleigh quotients, Hardy gaps and the cut-off experiments.

Two independent routes are kept for the Hardy gap of a compactly supported
``u = w phi``:

* direct: ``int |grad u|^p - int V |u|^p`` from two separate quadratures;
* Picone: ``int |x+y|^p - |y|^p - p |y|^(p-2) y.x`` with ``x = phi grad w``
  and ``y = w grad phi``. It is pointwise nonnegative and needs V only
  through the equation phi satisfies, not through its formula.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as Q
from .config import BipolarConfig
from .extremal import (CutoffFamily, Extremal, Field, InnerSmoothing, OuterTruncation,
                       PowerProfile, admissible_eps_bound, u_eps_field)
from .potentials import find_r0, v1_kernel, v2_kernel

SLOPE_TOL = 0.05


class DegenerateQuotientError(ZeroDivisionError):
    pass


class NegativeFieldError(ValueError):
    pass


@dataclass(frozen=True)
class GapResult:
    value: float
    error_estimate: float
    dirichlet: Q.IntegralResult
    potential: Q.IntegralResult

    def as_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "dirichlet": self.dirichlet.as_dict(), "potential": self.potential.as_dict()}


@dataclass(frozen=True)
class QuotientResult:
    value: float
    error_estimate: float
    dirichlet: Q.IntegralResult
    potential: Q.IntegralResult

    def as_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "dirichlet": self.dirichlet.as_dict(), "potential": self.potential.as_dict()}


def quotient(u: Field, W: str, grid, cfg: BipolarConfig, workers: int = 1) -> QuotientResult:
    E = Q.dirichlet_energy(u, grid, cfg, workers)
    P = Q.potential_energy(u, W, grid, cfg, workers)
    if not P.value > 3.0 * P.error_estimate or P.value == 0.0:
        raise DegenerateQuotientError(
            f"potential energy {P.value:.3e} indistinguishable from 0 (error {P.error_estimate:.1e})")
    q = E.value / P.value
    err = abs(q) * (E.error_estimate / abs(E.value) + P.error_estimate / P.value) if E.value else 0.0
    return QuotientResult(q, err, E, P)


def rayleigh_quotient(u: Field, W: str, grid, cfg: BipolarConfig, workers: int = 1) -> float:
    """int |grad u|^p / int W |u|^p."""
    return quotient(u, W, grid, cfg, workers).value


def hardy_gap(u: Field, mu: float, W: str, grid, cfg: BipolarConfig, workers: int = 1) -> GapResult:
    """int |grad u|^p - mu int W |u|^p."""
    E = Q.dirichlet_energy(u, grid, cfg, workers)
    P = Q.potential_energy(u, W, grid, cfg, workers)
    return GapResult(E.value - mu * P.value,
                     E.error_estimate + abs(mu) * P.error_estimate, E, P)


# -- ground-state splitting u = w phi -------------------------------------------

def _split(u: Field, ext: PowerProfile, g):
    """(w, |grad w|, |grad phi|, phi, x.y) at the nodes, with w = u / phi."""
    uv, ut, ur = u.eval(g)
    pv, pt, pr = ext.eval(g)
    if np.any(uv < -1e-14 * np.max(np.abs(uv), initial=0.0)):
        raise NegativeFieldError("u must be nonnegative")
    w = uv / pv
    wt = (ut - w * pt) / pv
    wr = (ur - w * pr) / pv
    # x = phi grad w, y = w grad phi
    xt, xr = pv * wt, pv * wr
    yt, yr = w * pt, w * pr
    return np.hypot(xt, xr), np.hypot(yt, yr), xt * yt + xr * yr


def picone_integrand(u: Field, ext: PowerProfile, cfg: BipolarConfig):
    p = cfg.p

    def f(g):
        nx, ny, xy = _split(u, ext, g)
        # |x+y|^2 from the parts so that nothing is differenced twice
        s = np.sqrt(np.maximum(nx**2 + ny**2 + 2.0 * xy, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            cross = np.where(ny > 0, ny ** (p - 2.0) * xy, 0.0)
        return s**p - ny**p - p * cross
    return f


def picone_gap(u: Field, grid, cfg: BipolarConfig, ext: PowerProfile | None = None,
               workers: int = 1) -> Q.IntegralResult:
    """Hardy gap int |grad u|^p - V|u|^p written as a nonnegative integrand."""
    ext = Extremal(cfg) if ext is None else ext
    return Q.integrate_biradial(picone_integrand(u, ext, cfg), grid, cfg, workers)


def lemma41_upper_bound(u: Field, grid, cfg: BipolarConfig, ext: PowerProfile | None = None,
                        workers: int = 1) -> Q.IntegralResult:
    """(p(p-1)/2) int (phi|grad w| + w|grad phi|)^(p-2) phi^2 |grad w|^2, w = u/phi."""
    ext = Extremal(cfg) if ext is None else ext
    p = cfg.p
    c = 0.5 * p * (p - 1.0)

    def f(g):
        nx, ny, _ = _split(u, ext, g)
        return c * (nx + ny) ** (p - 2.0) * nx**2
    return Q.integrate_biradial(f, grid, cfg, workers)


def weighted_energy(u: Field, grid, cfg: BipolarConfig, ext: PowerProfile | None = None,
                    workers: int = 1) -> Q.IntegralResult:
    """int phi^p |grad (u/phi)|^p, the lower-side weighted energy."""
    ext = Extremal(cfg) if ext is None else ext
    p = cfg.p

    def f(g):
        nx, _, _ = _split(u, ext, g)
        return nx**p
    return Q.integrate_biradial(f, grid, cfg, workers)


def shafrir_violation(x, y, p: float) -> np.ndarray:
    """Relative excess of the left side over the right side, rows of x and y.

    left  = |x+y|^p - p |y|^(p-2) (y.x) - |y|^p
    right = (p(p-1)/2) (|x|+|y|)^(p-2) |x|^2
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    nxy = np.linalg.norm(x + y, axis=1)
    yx = np.sum(x * y, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cross = np.where(ny > 0, ny ** (p - 2.0) * yx, 0.0)
    left = nxy**p - p * cross - ny**p
    right = 0.5 * p * (p - 1.0) * (nx + ny) ** (p - 2.0) * nx**2
    scale = nxy**p + p * np.abs(cross) + ny**p + right
    return np.where(scale > 0, (left - right) / np.where(scale > 0, scale, 1.0), 0.0)


def _shafrir_samples(rng, n, dim):
    x = rng.standard_normal((n, dim))
    y = rng.standard_normal((n, dim))
    # spread magnitudes over many decades, and include near-cancelling pairs
    x *= 10.0 ** rng.uniform(-6, 6, (n, 1))
    y *= 10.0 ** rng.uniform(-6, 6, (n, 1))
    k = n // 4
    y[:k] = -x[:k] * (1.0 + 10.0 ** rng.uniform(-8, 0, (k, 1)))
    return x, y


def shafrir_check(n_samples: int, p: float, dim: int, seed: int = 0) -> float:
    """Largest relative violation of the pointwise inequality; <= 0 up to roundoff."""
    if not p >= 2.0:
        raise ValueError("inequality is stated for p >= 2")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    x, y = _shafrir_samples(rng, n_samples, dim)
    return float(np.max(shafrir_violation(x, y, p)))


# -- the cut-off family --------------------------------------------------------

@dataclass(frozen=True)
class EpsPoint:
    eps: float
    I: float
    I_error: float
    I_picone: float
    J: float
    J_error: float
    V1_energy: float
    V2_energy: float

    @property
    def L(self) -> float:
        return self.I + self.J

    @property
    def L_error(self) -> float:
        return self.I_error + self.J_error

    def eps0_critical(self, cfg: BipolarConfig) -> float:
        """The eps0 above which L[u_eps] < 0 at this eps."""
        return (self.I + cfg.mu2 * self.V2_energy) / self.V1_energy

    def as_dict(self, cfg=None):
        d = {"eps": self.eps, "I": self.I, "I_error": self.I_error,
             "I_picone": self.I_picone, "J": self.J, "J_error": self.J_error,
             "L": self.L, "L_error": self.L_error,
             "V1_energy": self.V1_energy, "V2_energy": self.V2_energy}
        if cfg is not None:
            d["eps0_critical"] = self.eps0_critical(cfg)
        return d


def eps_grid(fam: CutoffFamily, cells_per_decade: int = 16, n_angular: int = 8,
             gauss_order: int = Q.DEFAULT_GAUSS) -> Q.CylindricalGrid:
    return Q.shell_grid(fam.cfg, ["pole1", "pole2"], list(fam.radii), cells_per_decade,
                        n_angular=n_angular, gauss_order=gauss_order)


def ieps_jeps(eps: float, eps0: float, cfg: BipolarConfig, r0: float | None = None,
              cells_per_decade: int = 16, n_angular: int = 8,
              gauss_order: int = Q.DEFAULT_GAUSS) -> EpsPoint:
    """I_eps = int |grad u|^p - V|u|^p and J_eps = int (mu2 V2 - eps0 V1)|u|^p, u = phi theta_eps."""
    if not eps0 > 0:
        raise ValueError("eps0 must be positive")
    fam = CutoffFamily(cfg, eps, r0)
    ext = Extremal(cfg)
    u = u_eps_field(ext, fam)
    grid = eps_grid(fam, cells_per_decade, n_angular, gauss_order)
    p = cfg.p
    E = Q.dirichlet_energy(u, grid, cfg)
    P = Q.potential_energy(u, "V", grid, cfg)
    W1 = Q.integrate_biradial(lambda g: v1_kernel(g, cfg) * np.abs(u.value(g)) ** p, grid, cfg)
    W2 = Q.integrate_biradial(lambda g: v2_kernel(g, cfg) * np.abs(u.value(g)) ** p, grid, cfg)
    pic = picone_gap(u, grid, cfg, ext)
    J = cfg.mu2 * W2.value - eps0 * W1.value
    J_err = abs(cfg.mu2) * W2.error_estimate + eps0 * W1.error_estimate
    I = E.value - P.value
    I_err = E.error_estimate + P.error_estimate + abs(I - pic.value)
    return EpsPoint(float(eps), I, I_err, pic.value, J, J_err, W1.value, W2.value)


def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of log|y| against log x."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.size < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {x.size}")
    if np.any(y == 0):
        raise ValueError("cannot fit log of zero")
    A = np.vstack([np.log(x), np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(slope), float(icpt)


@dataclass
class SharpnessReport:
    cfg: BipolarConfig
    eps0: float
    r0: float
    points: list
    gamma: float
    slope_I: float
    slope_J: float
    intercept_I: float
    intercept_J: float
    ratio_I: list
    ratio_J: list
    negative_below: float | None
    verdict: str
    checks: dict = field(default_factory=dict)

    @property
    def eps(self):
        return [pt.eps for pt in self.points]

    def I_model(self, eps):
        return math.exp(self.intercept_I) * eps**self.slope_I / math.log(1.0 / eps) ** 2

    def J_model(self, eps):
        return -math.exp(self.intercept_J) * eps**self.slope_J

    def rows(self):
        return [{"eps": pt.eps, "I_eps": pt.I, "J_eps": pt.J, "L": pt.L,
                 "I_model": self.I_model(pt.eps), "J_model": self.J_model(pt.eps)}
                for pt in self.points]

    def as_dict(self):
        return {
            "eps0": self.eps0, "eps0_over_mu1": self.eps0 / self.cfg.mu1, "r0": self.r0,
            "gamma": self.gamma, "slope_I": self.slope_I, "slope_J": self.slope_J,
            "ratio_I_max_over_min": max(self.ratio_I) / min(self.ratio_I),
            "ratio_J_min": min(self.ratio_J), "ratio_J_max": max(self.ratio_J),
            "I_over_absJ": [pt.I / abs(pt.J) for pt in self.points],
            "negative_below": self.negative_below,
            "points": [pt.as_dict(self.cfg) for pt in self.points],
            "checks": self.checks, "verdict": self.verdict,
        }


def default_eps_sequence(cfg: BipolarConfig, r0: float | None = None, n: int = 8,
                         hi: float = 1e-2, lo: float = 1e-5) -> np.ndarray:
    bound = admissible_eps_bound(cfg, r0)
    hi = min(hi, 0.5 * bound)
    if not lo < hi:
        raise ValueError(f"admissible range too small: eps < {bound:.3e}")
    return np.geomspace(hi, lo, n)


def sharpness_scan(eps_sequence, eps0: float | None, cfg: BipolarConfig,
                   workers: int = 1, min_negative: int = 2, **grid_params) -> SharpnessReport:
    """I_eps, J_eps and L[u_eps] along a geometric eps sequence, with rate fits.

    The verdict is ``contradiction_reproduced`` when L < 0 on the
    ``min_negative`` (or more) smallest eps values and below, and the J slope
    lies within ``SLOPE_TOL`` of gamma.
    """
    eps0 = 0.1 * cfg.mu1 if eps0 is None else float(eps0)
    r0 = find_r0(eps0, cfg)
    if eps_sequence is None:
        eps_sequence = default_eps_sequence(cfg, r0)
    eps_sequence = np.asarray(eps_sequence, dtype=float)
    if eps_sequence.size < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {eps_sequence.size}")
    order = np.argsort(-eps_sequence)
    eps_sequence = eps_sequence[order]

    def one(e):
        return ieps_jeps(float(e), eps0, cfg, r0, **grid_params)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(one, eps_sequence))
    else:
        points = [one(e) for e in eps_sequence]

    gamma = cfg.gamma
    eps = np.array([pt.eps for pt in points])
    logs = np.log(1.0 / eps)
    I = np.array([pt.I for pt in points])
    J = np.array([pt.J for pt in points])
    L = I + J
    sI, cI = fit_loglog(eps, I * logs**2)
    sJ, cJ = fit_loglog(eps, J)
    ratio_I = list(I * logs**2 / eps**gamma)
    ratio_J = list(np.abs(J) / eps**gamma)

    # longest run of negative L at the small-eps end
    k = len(points)
    while k > 0 and L[k - 1] < 0:
        k -= 1
    n_neg = len(points) - k
    negative_below = float(eps[k]) if n_neg else None
    checks = {
        "L_negative_tail": n_neg >= min_negative,
        "negative_points": int(n_neg),
        "slope_J_within_tol": abs(sJ - gamma) <= SLOPE_TOL,
        "slope_I_at_least_gamma": sI >= gamma - SLOPE_TOL,
        "J_negative": bool(np.all(J < 0)),
        "I_nonnegative": bool(np.all(I >= -np.array([pt.I_error for pt in points]))),
    }
    ok = checks["L_negative_tail"] and checks["slope_J_within_tol"]
    verdict = "contradiction_reproduced" if ok else "inconclusive"
    return SharpnessReport(cfg, eps0, r0, points, gamma, sI, sJ, cI, cJ,
                           ratio_I, ratio_J, negative_below, verdict, checks)


# -- exponent family -----------------------------------------------------------

def admissible_alpha(cfg: BipolarConfig) -> float:
    """Below this alpha, (r1 r2)^alpha has infinite energy at the poles."""
    return 1.0 - cfg.N / cfg.p


def family_member(cfg: BipolarConfig, alpha: float, R: float, lam: float = 1.0,
                  r_in: float | None = None) -> Field:
    """(r1 r2)^alpha smoothly cut off beyond R, and near the poles only if needed."""
    u = PowerProfile(cfg, alpha, lam) * OuterTruncation(cfg, R)
    if alpha <= admissible_alpha(cfg):
        r_in = 1e-3 * cfg.M if r_in is None else r_in
        u = u * InnerSmoothing(cfg, r_in)
    return u


def family_grid(cfg: BipolarConfig, R: float, r_in: float | None = None, **kw) -> Q.CylindricalGrid:
    extra = list(np.geomspace(R, 2.0 * R, 5))
    pole = [] if r_in is None else list(np.geomspace(r_in, 2.0 * r_in, 5))
    return Q.graded_mesh(cfg, R=4.0 * R, extra_radii=extra, extra_pole_radii=pole, **kw)


@dataclass
class QuotientScan:
    alphas: list
    quotients: list
    errors: list
    alpha_star: float | None
    quotient_star: float | None
    unimodal: bool
    R: float
    inconclusive: bool = False

    def as_dict(self):
        return {"alphas": self.alphas, "quotients": self.quotients, "errors": self.errors,
                "alpha_star": self.alpha_star, "quotient_star": self.quotient_star,
                "unimodal": self.unimodal, "R": self.R, "inconclusive": self.inconclusive}


def _is_unimodal(vals) -> bool:
    d = np.sign(np.diff(vals))
    d = d[d != 0]
    changes = int(np.sum(d[1:] != d[:-1]))
    return changes == 0 or (changes == 1 and d[0] < 0)


def golden_section(f, a: float, b: float, tol: float = 1e-4, max_iter: int = 100):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def exponent_family_scan(alpha_range, R: float, cfg: BipolarConfig, n: int = 9,
                         lam: float = 1.0, tol: float = 1e-4, workers: int = 1,
                         **grid_params) -> QuotientScan:
    """Quotient of the truncated power family against V, minimized over alpha."""
    if not cfg.p > 2.0:
        raise ValueError("the family scan targets the attainment regime p > 2")
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    if not lo < cfg.beta < hi:
        raise ValueError(f"alpha range must contain beta={cfg.beta}")
    grid = family_grid(cfg, R, **grid_params)
    grid_in = family_grid(cfg, R, r_in=1e-3 * cfg.M, **grid_params)

    def q(alpha):
        g = grid_in if alpha <= admissible_alpha(cfg) else grid
        res = quotient(family_member(cfg, alpha, R, lam), "V", g, cfg, workers)
        return res

    alphas = list(np.linspace(lo, hi, n))
    res = [q(a) for a in alphas]
    vals = [r.value for r in res]
    errs = [r.error_estimate for r in res]
    if not _is_unimodal(vals):
        return QuotientScan(alphas, vals, errs, None, None, False, R, inconclusive=True)
    k = int(np.argmin(vals))
    a = alphas[max(k - 1, 0)]
    b = alphas[min(k + 1, n - 1)]
    astar, qstar = golden_section(lambda x: q(x).value, a, b, tol)
    return QuotientScan(alphas, vals, errs, float(astar), float(qstar), True, R)
