"""Quadrature of axisymmetric integrands over R^N with point singularities.

The half-plane (t, rho) is covered by polar patches:

* one patch around each pole, radius ``r_b`` (default M/4), geometrically
  graded toward the pole;
* one patch around the midpoint a that runs out to the truncation radius R,
  geometrically graded toward a and toward infinity.

The patches are glued with a smooth partition of unity in the pole distances
so that no singular point ever lies inside a cell: each pole sits on the
degenerate edge of its own patch and is invisible (weight zero) to the outer
one. Cell contributions are tensor Gauss-Legendre sums combined with
``math.fsum``, so the total does not depend on cell order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import BipolarConfig, Geometry, sphere_surface_coeff, unit_sphere_area
from .potentials import potential

DEFAULT_GAUSS = 8
DEFAULT_CELLS_PER_DECADE = 8
DEFAULT_DECADES = 5
TAIL_SAFETY = 2.0


class QuadratureError(RuntimeError):
    def __init__(self, message, cell=None):
        super().__init__(message if cell is None else f"{message} in cell {cell}")
        self.cell = cell


class DivergentTailError(ValueError):
    pass


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    tail_bound: float
    cells: int

    def as_dict(self) -> dict:
        return {"value": self.value, "error_estimate": self.error_estimate,
                "tail_bound": self.tail_bound, "cells": self.cells}


@dataclass
class Patch:
    """Tensor cells in polar coordinates (r, angle) about an axis point."""

    center: str
    radial: np.ndarray
    angular: np.ndarray
    weight: str | None = None
    open_inner: bool = False
    open_outer: bool = False

    def __post_init__(self):
        self.radial = np.asarray(self.radial, dtype=float)
        self.angular = np.asarray(self.angular, dtype=float)
        for name, b in (("radial", self.radial), ("angular", self.angular)):
            if b.ndim != 1 or b.size < 2 or not np.all(np.diff(b) > 0):
                raise ValueError(f"{name} breakpoints must be strictly increasing")
        if self.radial[0] < 0 or self.angular[0] < 0 or self.angular[-1] > math.pi + 1e-15:
            raise ValueError("breakpoints outside the half-plane")

    @property
    def cells(self) -> int:
        return (self.radial.size - 1) * (self.angular.size - 1)


@dataclass
class CylindricalGrid:
    patches: list
    gauss_order: int = DEFAULT_GAUSS
    R: float = math.inf
    r_blend: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def cells(self) -> int:
        return sum(p.cells for p in self.patches)

    def with_order(self, g: int) -> "CylindricalGrid":
        return CylindricalGrid(self.patches, g, self.R, self.r_blend, self.meta)

    def refined(self) -> "CylindricalGrid":
        """Every cell split in two along each direction."""
        def split(b):
            mid = 0.5 * (b[:-1] + b[1:])
            # geometric midpoints keep graded cells self-similar
            pos = b[:-1] > 0
            mid[pos] = np.sqrt(b[:-1][pos] * b[1:][pos])
            return np.sort(np.concatenate([b, mid]))
        patches = [Patch(p.center, split(p.radial), split(p.angular), p.weight,
                         p.open_inner, p.open_outer) for p in self.patches]
        return CylindricalGrid(patches, self.gauss_order, self.R, self.r_blend, self.meta)


# -- partition of unity ----------------------------------------------------------

def _smooth_heaviside(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def blend(r, r_b):
    """1 inside r_b/2, 0 beyond r_b."""
    return _smooth_heaviside((r_b - r) / (0.5 * r_b))


def _patch_weight(kind, g: Geometry, r_b):
    if kind is None:
        return None
    if kind == "pole1":
        return blend(g.r1, r_b)
    if kind == "pole2":
        return blend(g.r2, r_b)
    if kind == "outer":
        return 1.0 - blend(g.r1, r_b) - blend(g.r2, r_b)
    raise ValueError(kind)


# -- mesh construction -----------------------------------------------------------

def model_exponents(cfg: BipolarConfig) -> dict:
    """Radial exponents kappa with integrand mass ~ r^kappa near each point.

    pole: |grad phi|^p against r^(N-1) dr gives r^((p-N)(2-p)/(2(p-1)) - 1);
    infinity: ~ s^((1-N)/(p-1)), so mass beyond R ~ R^((p-N)/(p-1));
    midpoint: V2's worst direction, p - 4 + (N - 1) + 1.
    """
    N, p = cfg.N, cfg.p
    return {
        "pole": (p - N) * (2.0 - p) / (2.0 * (p - 1.0)),
        "infinity": (p - N) / (p - 1.0),
        "midpoint": p - 4.0 + N,
    }


def _decades_for(kappa: float, target: float = 12.0, lo: int = DEFAULT_DECADES,
                 hi: int = 60) -> int:
    if kappa == 0 or not np.isfinite(kappa):
        return lo
    return int(min(hi, max(lo, math.ceil(target / abs(kappa)))))


def _geometric(a: float, b: float, per_decade: int) -> np.ndarray:
    n = max(1, int(math.ceil(per_decade * math.log10(b / a) - 1e-9)))
    return np.geomspace(a, b, n + 1)


def _merge(*arrays, extra=()):
    pts = np.concatenate([np.asarray(a, dtype=float) for a in arrays] + [np.asarray(extra, dtype=float)])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * np.abs(pts[1:])])
    return pts[keep]


def default_cutoffs(cfg: BipolarConfig, r_b: float | None = None) -> dict:
    r_b = 0.25 * cfg.M if r_b is None else r_b
    kap = model_exponents(cfg)
    # keep r^(p(beta-1)) representable
    cap = int(250.0 / (cfg.p * (1.0 - cfg.beta) + 1.0))
    dp = min(_decades_for(kap["pole"]), cap)
    dm = _decades_for(kap["midpoint"], hi=40)
    return {"pole1": r_b * 10.0**-dp, "pole2": r_b * 10.0**-dp,
            "midpoint": cfg.M * 10.0**-dm}


def default_R(cfg: BipolarConfig) -> float:
    return cfg.M * 10.0 ** _decades_for(model_exponents(cfg)["infinity"], lo=3)


def graded_mesh(cfg: BipolarConfig, inner_cutoffs: dict | None = None,
                R: float | None = None, cells_per_decade: int = DEFAULT_CELLS_PER_DECADE,
                *, gauss_order: int = DEFAULT_GAUSS, n_angular: int = 24,
                n_angular_pole: int = 8, middle_cells: int = 28,
                extra_radii=(), extra_pole_radii=(), r_blend: float | None = None
                ) -> CylindricalGrid:
    """Whole-space grid: two pole patches blended into one midpoint patch.

    ``extra_radii`` (distances from a) and ``extra_pole_radii`` (distances
    from either pole) are forced to be breakpoints, e.g. truncation shells.
    """
    M = cfg.M
    r_b = 0.25 * M if r_blend is None else float(r_blend)
    cut = default_cutoffs(cfg, r_b)
    cut.update(inner_cutoffs or {})
    R = default_R(cfg) if R is None else float(R)
    for key in ("pole1", "pole2"):
        if not 0 < cut[key] < 0.5 * r_b:
            raise ValueError(f"cutoff for {key} must lie in (0, {0.5 * r_b})")
    if not 0 < cut["midpoint"] < 0.125 * M:
        raise ValueError("midpoint cutoff must lie in (0, M/8)")
    if R <= 2.0 * M:
        raise ValueError(f"R={R} must exceed 2M")
    if r_b > 0.25 * M:
        raise ValueError("pole patches overlap the midpoint region (r_blend > M/4)")

    pole_patches = []
    for key in ("pole1", "pole2"):
        radial = _merge(_geometric(cut[key], 0.5 * r_b, cells_per_decade),
                        np.linspace(0.5 * r_b, r_b, 9),
                        extra=[r for r in extra_pole_radii if cut[key] < r < r_b])
        pole_patches.append(Patch(key, radial, np.linspace(0, math.pi, n_angular_pole + 1),
                                  weight=key, open_inner=True))

    inner = _geometric(cut["midpoint"], 0.125 * M, cells_per_decade)
    middle = np.linspace(0.125 * M, M, middle_cells + 1)
    outer = _geometric(M, R, cells_per_decade)
    radial = _merge(inner, middle, outer, extra=[r for r in extra_radii if cut["midpoint"] < r < R])
    mid_patch = Patch("midpoint", radial, np.linspace(0, math.pi, n_angular + 1),
                      weight="outer", open_inner=True, open_outer=True)
    meta = {"cutoffs": cut, "cells_per_decade": cells_per_decade,
            "grading_ratio": 10.0 ** (-1.0 / cells_per_decade)}
    return CylindricalGrid(pole_patches + [mid_patch], gauss_order, R, r_b, meta)


def shell_grid(cfg: BipolarConfig, centers, radii, cells_per_decade: int = 2 * DEFAULT_CELLS_PER_DECADE,
               *, n_angular: int = 8, gauss_order: int = DEFAULT_GAUSS,
               min_cells: int = 4) -> CylindricalGrid:
    """Annular patches about each center with every entry of ``radii`` a breakpoint."""
    radii = np.sort(np.asarray(radii, dtype=float))
    pieces = []
    for lo, hi in zip(radii[:-1], radii[1:]):
        if lo > 0:
            n = max(min_cells, int(math.ceil(cells_per_decade * math.log10(hi / lo))))
            pieces.append(np.geomspace(lo, hi, n + 1))
        else:
            pieces.append(np.linspace(lo, hi, min_cells + 1))
    radial = _merge(*pieces)
    ang = np.linspace(0, math.pi, n_angular + 1)
    if isinstance(centers, str):
        centers = [centers]
    return CylindricalGrid([Patch(c, radial, ang) for c in centers], gauss_order,
                           meta={"shell_radii": [float(r) for r in radii]})


# -- integration -----------------------------------------------------------------

_GL_CACHE: dict = {}


def _gauss(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _cell_nodes(lo, hi, n):
    x, w = _gauss(n)
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * x[None, :]
    return nodes, half[:, None] * w[None, :]


def _patch_cell_sums(f, patch: Patch, cfg: BipolarConfig, order: int, r_b: float,
                     chunk: int = 4096):
    """Per-cell integrals, shape (n_radial_cells, n_angular_cells)."""
    rn, rw = _cell_nodes(patch.radial[:-1], patch.radial[1:], order)
    an, aw = _cell_nodes(patch.angular[:-1], patch.angular[1:], order)
    nr, na = rn.shape[0], an.shape[0]
    coeff = sphere_surface_coeff(cfg.N)
    jr = rw * rn ** (cfg.N - 1)
    ja = aw * np.sin(an) ** (cfg.N - 2)
    out = np.empty((nr, na))
    for start in range(0, nr, max(1, chunk // max(na, 1))):
        stop = min(nr, start + max(1, chunk // max(na, 1)))
        R_ = rn[start:stop, None, :, None]
        A_ = an[None, :, None, :]
        shape = (stop - start, na, order, order)
        Rb = np.broadcast_to(R_, shape).ravel()
        Ab = np.broadcast_to(A_, shape).ravel()
        g = Geometry.polar(patch.center, Rb, Ab, cfg)
        w = np.broadcast_to(jr[start:stop, None, :, None] * ja[None, :, None, :], shape).ravel()
        pw = _patch_weight(patch.weight, g, r_b)
        vals = np.zeros_like(Rb)
        live = np.ones(Rb.shape, dtype=bool) if pw is None else pw != 0.0
        if live.all():
            with np.errstate(all="ignore"):
                vals = np.asarray(f(g), dtype=float)
        else:
            sub = Geometry(g.t1[live], g.t2[live], g.tm[live], g.rho[live])
            with np.errstate(all="ignore"):
                vals[live] = np.asarray(f(sub), dtype=float)
        if pw is not None:
            vals = vals * pw
        bad = ~np.isfinite(vals)
        if bad.any():
            k = int(np.flatnonzero(bad)[0]) // (order * order)
            i, j = start + k // na, k % na
            cell = {"center": patch.center,
                    "r": (float(patch.radial[i]), float(patch.radial[i + 1])),
                    "angle": (float(patch.angular[j]), float(patch.angular[j + 1]))}
            raise QuadratureError("integrand not finite", cell)
        out[start:stop] = coeff * (vals * w).reshape(shape).sum(axis=(2, 3))
    return out


def tail_bound(decay_exponent: float, R: float, coefficient: float,
               cfg: BipolarConfig) -> float:
    """Bound on the integral of coefficient * |x|^decay over |x| > R.

    ``coefficient`` already contains the angular measure and any
    comparability constants.
    """
    k = decay_exponent + cfg.N
    if not k < 0:
        raise DivergentTailError(
            f"tail with decay exponent {decay_exponent} diverges in dimension {cfg.N}")
    return abs(coefficient) * R**k / abs(k)


def core_bound(growth_exponent: float, r: float, coefficient: float,
               cfg: BipolarConfig) -> float:
    """Integral of coefficient * |x - c|^growth over the ball of radius r."""
    k = growth_exponent + cfg.N
    if not k > 0:
        raise DivergentTailError(
            f"core with exponent {growth_exponent} diverges in dimension {cfg.N}")
    return abs(coefficient) * r**k / k


def _end_estimate(rings, radii, cfg, at_inner: bool) -> float:
    """Extrapolate the power law seen in the two end rings past the patch edge.

    On geometric rings a power law r^k gives ring masses in geometric
    progression with ratio c_edge / c_next, so the missing part is the sum
    of that series (the same number as ``tail_bound``/``core_bound`` with the
    fitted exponent, without forming r^k). A vanishing edge ring means the
    integrand is zero there (support ended or underflow) and counts as no tail.
    """
    rings = np.abs(np.asarray(rings, dtype=float))
    radii = np.asarray(radii, dtype=float)
    if not at_inner:
        rings = rings[::-1]
        radii = radii[::-1]
    c0, c1 = rings[0], rings[1]
    if c0 == 0.0:
        return 0.0
    if not math.isclose(radii[1] / radii[0], radii[2] / radii[1], rel_tol=1e-6):
        return math.inf
    if not c1 > c0:
        return math.inf
    rho = c0 / c1
    # ratio close to 1 means an exponent near 0: log-divergent, no bound
    if math.log(1.0 / rho) < 1e-3 * abs(math.log(radii[1] / radii[0])):
        return math.inf
    return TAIL_SAFETY * c0 * rho / (1.0 - rho)


def _integrate_once(f, grid: CylindricalGrid, cfg, order, workers=1):
    def run(patch):
        return patch, _patch_cell_sums(f, patch, cfg, order, grid.r_blend)

    if workers and workers > 1 and len(grid.patches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, grid.patches))
    else:
        results = [run(p) for p in grid.patches]
    return results


def integrate_biradial(f, grid: CylindricalGrid, cfg: BipolarConfig,
                       workers: int = 1) -> IntegralResult:
    """Integral over R^N of an integrand given as a function of :class:`Geometry`.

    The value uses Gauss order g+2 per direction; the error estimate is the
    difference from order g plus extrapolated bounds for every truncated
    patch edge (core near a singular point, tail beyond R).
    """
    g = grid.gauss_order
    hi = _integrate_once(f, grid, cfg, g + 2, workers)
    lo = _integrate_once(f, grid, cfg, g, workers)
    v_hi = math.fsum(s for _, cs in hi for s in cs.ravel())
    v_lo = math.fsum(s for _, cs in lo for s in cs.ravel())
    tail = 0.0
    for patch, cs in hi:
        rings = cs.sum(axis=1)
        if patch.open_inner and patch.radial[0] > 0:
            tail += _end_estimate(rings, patch.radial, cfg, True)
        if patch.open_outer:
            tail += _end_estimate(rings, patch.radial, cfg, False)
    return IntegralResult(v_hi, abs(v_hi - v_lo) + tail, tail, grid.cells)


def cell_contributions(f, grid: CylindricalGrid, cfg: BipolarConfig, order: int | None = None):
    """Flat list of per-cell integrals (for order-independence checks)."""
    order = grid.gauss_order if order is None else order
    return [s for _, cs in _integrate_once(f, grid, cfg, order) for s in cs.ravel()]


# -- energies --------------------------------------------------------------------

def dirichlet_energy(u, grid: CylindricalGrid, cfg: BipolarConfig, workers: int = 1) -> IntegralResult:
    p = cfg.p
    return integrate_biradial(lambda g: u.grad_norm(g) ** p, grid, cfg, workers)


def potential_energy(u, W: str, grid: CylindricalGrid, cfg: BipolarConfig,
                     workers: int = 1) -> IntegralResult:
    kern = potential(W)
    p = cfg.p
    return integrate_biradial(lambda g: kern(g, cfg) * np.abs(u.value(g)) ** p, grid, cfg, workers)


_CENTER_NAMES = ("pole1", "pole2", "midpoint")


def _center_name(center, cfg: BipolarConfig) -> str:
    if isinstance(center, str):
        if center not in _CENTER_NAMES:
            raise ValueError(f"unknown center {center!r}")
        return center
    c = np.asarray(center, dtype=float)
    for name, pt in zip(_CENTER_NAMES, (cfg.a1, cfg.a2, cfg.a)):
        if np.allclose(c, pt, rtol=0, atol=1e-14 * cfg.M):
            return name
    raise ValueError("shell centers must be a1, a2 or a (axisymmetry)")


def shell_integral(center, inner: float, outer: float, integrand, cfg: BipolarConfig,
                   cells_per_decade: int = 2 * DEFAULT_CELLS_PER_DECADE,
                   n_angular: int = 8, gauss_order: int = DEFAULT_GAUSS,
                   extra_radii=()) -> IntegralResult:
    """Integral of ``integrand(Geometry)`` over inner < |x - center| < outer."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    name = _center_name(center, cfg)
    radii = [inner, outer] + [r for r in extra_radii if inner < r < outer]
    grid = shell_grid(cfg, name, radii, cells_per_decade, n_angular=n_angular,
                      gauss_order=gauss_order)
    return integrate_biradial(integrand, grid, cfg)


def ball_volume_check(cfg: BipolarConfig, R: float) -> float:
    """omega_N R^N, reference value for the unit-ball test."""
    return unit_sphere_area(cfg.N) / cfg.N * R**cfg.N
