"""The extremal phi = lam (r1 r2)^beta, the logarithmic cut-off and test fields.

Fields act on a :class:`~bipolar_hardy.config.Geometry` batch and return the
value together with the gradient split into its axial and transverse
components, ``(value, d/dt, d/drho)``. Because every field here is
axisymmetric, those two components carry the full gradient norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import BipolarConfig, Geometry
from .potentials import GUARD, PoleProximityError


class Field:
    """Axisymmetric scalar field: subclasses implement :meth:`eval`."""

    def eval(self, g: Geometry):
        raise NotImplementedError

    def value(self, g: Geometry) -> np.ndarray:
        return self.eval(g)[0]

    def grad_norm(self, g: Geometry) -> np.ndarray:
        _, gt, gr = self.eval(g)
        return np.hypot(gt, gr)

    def __mul__(self, other: "Field") -> "Field":
        return Product(self, other)

    def scaled(self, lam: float) -> "Field":
        return Scaled(self, lam)


@dataclass(frozen=True)
class Scaled(Field):
    base: Field
    lam: float

    def eval(self, g):
        v, gt, gr = self.base.eval(g)
        return self.lam * v, self.lam * gt, self.lam * gr

    def grad_norm(self, g):
        return abs(self.lam) * self.base.grad_norm(g)


@dataclass(frozen=True)
class Product(Field):
    first: Field
    second: Field

    def eval(self, g):
        u, ut, ur = self.first.eval(g)
        w, wt, wr = self.second.eval(g)
        return u * w, u * wt + w * ut, u * wr + w * ur


@dataclass(frozen=True)
class PowerProfile(Field):
    """lam * (r1 r2)^alpha."""

    cfg: BipolarConfig
    alpha: float
    lam: float = 1.0

    def eval(self, g):
        v = self.lam * (g.r1 * g.r2) ** self.alpha
        k1 = 1.0 / g.r1**2
        k2 = 1.0 / g.r2**2
        gt = v * self.alpha * (g.t1 * k1 + g.t2 * k2)
        gr = v * self.alpha * g.rho * (k1 + k2)
        return v, gt, gr

    def grad_norm(self, g):
        # |r2^2 (x-a1) + r1^2 (x-a2)| = 2 r1 r2 |x-a|
        v = abs(self.lam) * (g.r1 * g.r2) ** self.alpha
        return 2.0 * abs(self.alpha) * v * g.rm / (g.r1 * g.r2)


class Extremal(PowerProfile):
    def __init__(self, cfg: BipolarConfig, lam: float = 1.0):
        super().__init__(cfg, cfg.beta, lam)


# -- pointwise evaluation in R^N ------------------------------------------------

def _pole_distances(x, cfg):
    x = np.asarray(x, dtype=float)
    r1 = float(np.linalg.norm(x - cfg.a1))
    r2 = float(np.linalg.norm(x - cfg.a2))
    for name, r in (("pole1", r1), ("pole2", r2)):
        if r <= GUARD * cfg.M:
            raise PoleProximityError(name, r)
    return x, r1, r2


def eval_phi(x, ext: PowerProfile) -> float:
    _, r1, r2 = _pole_distances(x, ext.cfg)
    return ext.lam * r1**ext.alpha * r2**ext.alpha


def grad_phi(x, ext: PowerProfile) -> np.ndarray:
    cfg = ext.cfg
    x, r1, r2 = _pole_distances(x, cfg)
    b = ext.alpha
    return ext.lam * b * r1 ** (b - 2) * r2 ** (b - 2) * (
        r2**2 * (x - cfg.a1) + r1**2 * (x - cfg.a2))


# -- logarithmic cut-off -------------------------------------------------------

class AdmissibilityError(ValueError):
    pass


class BreakpointError(ValueError):
    """Gradient requested on one of the spheres |x - a_i| in {eps^2, eps, eps^(1/2)}."""


@dataclass(frozen=True)
class CutoffFamily(Field):
    """theta_eps: log tents on eps^2 < |x-a_i| < eps^(1/2), peak 1 at |x-a_i| = eps."""

    cfg: BipolarConfig
    eps: float
    r0: float | None = None

    def __post_init__(self):
        bound = admissible_eps_bound(self.cfg, self.r0)
        if not 0.0 < self.eps < bound:
            raise AdmissibilityError(
                f"eps={self.eps} outside (0, {bound:.6g}) "
                f"[min(1/2, r0^2) and eps^(1/2) < M/4]")

    @property
    def radii(self) -> tuple[float, float, float]:
        return self.eps**2, self.eps, math.sqrt(self.eps)

    def profile(self, r):
        """theta and d theta / dr as functions of the distance to a pole."""
        e2, e1, eh = self.radii
        L = math.log(1.0 / self.eps)
        r = np.asarray(r, dtype=float)
        inner = (r > e2) & (r <= e1)
        outer = (r > e1) & (r < eh)
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        th = np.where(inner, (lr - 2.0 * math.log(self.eps)) / L, 0.0)
        th = np.where(outer, (math.log(self.eps) - 2.0 * lr) / L, th)
        dth = np.where(inner, 1.0 / (L * r), 0.0)
        dth = np.where(outer, -2.0 / (L * r), dth)
        return th, dth

    def eval(self, g):
        th1, d1 = self.profile(g.r1)
        th2, d2 = self.profile(g.r2)
        k1 = np.where(d1 != 0, d1 / np.where(g.r1 > 0, g.r1, 1.0), 0.0)
        k2 = np.where(d2 != 0, d2 / np.where(g.r2 > 0, g.r2, 1.0), 0.0)
        gt = k1 * g.t1 + k2 * g.t2
        gr = (k1 + k2) * g.rho
        return th1 + th2, gt, gr


def admissible_eps_bound(cfg: BipolarConfig, r0: float | None = None) -> float:
    bound = min(0.5, (0.25 * cfg.M) ** 2)
    if r0 is not None:
        bound = min(bound, r0**2)
    return bound


def eval_theta(x, fam: CutoffFamily) -> float:
    x, r1, r2 = _pole_distances(x, fam.cfg)
    return float(fam.profile(r1)[0] + fam.profile(r2)[0])


def grad_theta(x, fam: CutoffFamily) -> np.ndarray:
    cfg = fam.cfg
    x, r1, r2 = _pole_distances(x, cfg)
    for r in (r1, r2):
        for b in fam.radii:
            if abs(r - b) <= 1e-14 * b:
                raise BreakpointError(f"|x - a_i| = {r!r} sits on the sphere of radius {b!r}")
    out = np.zeros(cfg.N)
    for pole, r in ((cfg.a1, r1), (cfg.a2, r2)):
        d = float(fam.profile(r)[1])
        if d:
            out += d * (x - pole) / r
    return out


def eval_u_eps(x, ext: PowerProfile, fam: CutoffFamily):
    """(u, grad u) for u = phi * theta_eps, by the product rule."""
    th = eval_theta(x, fam)
    phi = eval_phi(x, ext)
    return phi * th, th * grad_phi(x, ext) + phi * grad_theta(x, fam)


def u_eps_field(ext: PowerProfile, fam: CutoffFamily) -> Field:
    return Product(ext, fam)


# -- smooth modulations used to build admissible test functions -----------------

def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u)


@dataclass(frozen=True)
class OuterTruncation(Field):
    """1 for |x-a| <= R, 0 beyond 2R, cubic smoothstep in log|x-a| between."""

    cfg: BipolarConfig
    R: float

    def eval(self, g):
        s = g.rm
        with np.errstate(divide="ignore"):
            u = np.log(s / self.R) / math.log(2.0)
        S, dS = _smoothstep(u)
        w = 1.0 - S
        k = np.where(s > 0, -dS / (math.log(2.0) * np.where(s > 0, s, 1.0) ** 2), 0.0)
        return w, k * g.tm, k * g.rho


@dataclass(frozen=True)
class InnerSmoothing(Field):
    """0 for |x-a_i| <= r_in, 1 beyond 2 r_in (both poles), smoothstep in log radius."""

    cfg: BipolarConfig
    r_in: float

    def eval(self, g):
        w = np.ones_like(g.rho)
        gt = np.zeros_like(g.rho)
        gr = np.zeros_like(g.rho)
        for r, t in ((g.r1, g.t1), (g.r2, g.t2)):
            u = np.log(r / self.r_in) / math.log(2.0)
            S, dS = _smoothstep(u)
            k = dS / (math.log(2.0) * r**2)
            gt, gr = S * gt + w * k * t, S * gr + w * k * g.rho
            w = w * S
        return w, gt, gr


def _bump(z):
    inside = z < 1.0
    zz = np.where(inside, z, 0.0)
    b = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - zz)), 0.0)
    db = np.where(inside, -b / (1.0 - zz) ** 2, 0.0)
    return b, db


@dataclass(frozen=True)
class PlaneBump(Field):
    """C-infinity bump in the (t, rho) half-plane around (t0, rho0), radius w.

    With rho0 > w the support is a solid torus that never meets the axis.
    """

    cfg: BipolarConfig
    t0: float
    rho0: float
    w: float

    def eval(self, g):
        dt = g.tm - self.t0
        dr = g.rho - self.rho0
        b, db = _bump((dt**2 + dr**2) / self.w**2)
        k = 2.0 * db / self.w**2
        return b, k * dt, k * dr


@dataclass(frozen=True)
class PoleAnnulusBump(Field):
    """C-infinity bump in |x - a1| centered at radius c with half-width w."""

    cfg: BipolarConfig
    c: float
    w: float

    def eval(self, g):
        r = g.r1
        b, db = _bump(((r - self.c) / self.w) ** 2)
        k = db * 2.0 * (r - self.c) / self.w**2 / r
        return b, k * g.t1, k * g.rho
