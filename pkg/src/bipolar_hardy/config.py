"""Problem configuration, derived constants and the axisymmetric frame.

Every quantity in this package depends on a point only through its position
relative to the pole axis, so integrals over R^N reduce to the half-plane
(t, rho) with measure ``sphere_surface_coeff(N) * rho**(N-2) dt drho``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised for inadmissible (N, p, a1, a2) combinations."""


@dataclass(frozen=True)
class BipolarConfig:
    N: int
    p: float
    a1: np.ndarray
    a2: np.ndarray
    a: np.ndarray = field(repr=False)
    M: float
    beta: float
    mu1: float
    mu2: float
    axis: np.ndarray = field(repr=False)

    @property
    def gamma(self) -> float:
        """Common power exponent of the cut-off estimates, (p-N)(p/(2(p-1)) - 1)."""
        return (self.p - self.N) * (self.p / (2.0 * (self.p - 1.0)) - 1.0)

    def as_dict(self) -> dict:
        return {
            "dimension": self.N,
            "p": self.p,
            "pole1": [float(v) for v in self.a1],
            "pole2": [float(v) for v in self.a2],
            "M": self.M,
            "beta": self.beta,
            "mu1": self.mu1,
            "mu2": self.mu2,
        }


def make_config(N, p, a1, a2) -> BipolarConfig:
    """Validate the inputs and compute every derived constant once."""
    if int(N) != N or N < 3:
        raise ConfigError(f"dimension must be an integer >= 3, got N={N}")
    N = int(N)
    p = float(p)
    if not p > 1.0:
        raise ConfigError(f"exponent must satisfy p > 1, got p={p}")
    if not p < N:
        raise ConfigError(f"exponent must satisfy p < N={N}, got p={p}")
    a1 = np.asarray(a1, dtype=float).reshape(-1)
    a2 = np.asarray(a2, dtype=float).reshape(-1)
    if a1.shape != (N,) or a2.shape != (N,):
        raise ConfigError(
            f"poles must have {N} coordinates, got {a1.size} and {a2.size}")
    M = float(np.linalg.norm(a1 - a2))
    if M == 0.0:
        raise ConfigError("poles coincide: a1 == a2")
    k = (N - p) / (p - 1.0)
    a1.setflags(write=False)
    a2.setflags(write=False)
    a = 0.5 * (a1 + a2)
    a.setflags(write=False)
    axis = (a2 - a1) / M
    axis.setflags(write=False)
    return BipolarConfig(
        N=N, p=p, a1=a1, a2=a2, a=a, M=M,
        beta=(p - N) / (2.0 * (p - 1.0)),
        mu1=(p - 1.0) / 4.0 * k**p,
        mu2=(p - 2.0) / 2.0 * k ** (p - 1.0),
        axis=axis,
    )


def default_config(N=4, p=3.0) -> BipolarConfig:
    """Poles at -e1 and +e1, the desk configuration."""
    a1 = np.zeros(N)
    a2 = np.zeros(N)
    a1[0], a2[0] = -1.0, 1.0
    return make_config(N, p, a1, a2)


def _parse_point(text: str) -> list[float]:
    text = text.strip().strip("[]()")
    return [float(v) for v in text.replace(",", " ").split()]


def load_config_file(path, overrides: dict | None = None) -> BipolarConfig:
    """Read ``dimension``, ``p``, ``pole1``, ``pole2`` from a flat key=value file.

    Keys in ``overrides`` (``None`` values ignored) win over the file.
    """
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    parser.read_string("[config]\n" + text)
    raw = dict(parser["config"])
    values = {
        "dimension": int(raw["dimension"]) if "dimension" in raw else None,
        "p": float(raw["p"]) if "p" in raw else None,
        "pole1": _parse_point(raw["pole1"]) if "pole1" in raw else None,
        "pole2": _parse_point(raw["pole2"]) if "pole2" in raw else None,
    }
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return config_from_values(values)


def config_from_values(values: dict) -> BipolarConfig:
    N = values.get("dimension") or 4
    p = values.get("p") if values.get("p") is not None else 3.0
    a1, a2 = values.get("pole1"), values.get("pole2")
    if a1 is None or a2 is None:
        base = default_config(N, p)
        a1 = base.a1 if a1 is None else a1
        a2 = base.a2 if a2 is None else a2
    return make_config(N, p, a1, a2)


@dataclass(frozen=True)
class CylCoords:
    t: float
    rho: float


def to_cyl(x, cfg: BipolarConfig) -> CylCoords:
    d = np.asarray(x, dtype=float) - cfg.a
    t = float(d @ cfg.axis)
    rho = float(np.linalg.norm(d - t * cfg.axis))
    return CylCoords(t, rho)


def _perp_unit(cfg: BipolarConfig) -> np.ndarray:
    # a fixed unit vector orthogonal to the axis
    k = int(np.argmin(np.abs(cfg.axis)))
    e = np.zeros(cfg.N)
    e[k] = 1.0
    e -= (e @ cfg.axis) * cfg.axis
    return e / np.linalg.norm(e)


def from_cyl(c: CylCoords, cfg: BipolarConfig, direction=None) -> np.ndarray:
    """Embed (t, rho) back into R^N; ``direction`` picks the transverse ray."""
    if direction is None:
        e = _perp_unit(cfg)
    else:
        e = np.asarray(direction, dtype=float)
        e = e - (e @ cfg.axis) * cfg.axis
        e = e / np.linalg.norm(e)
    return cfg.a + c.t * cfg.axis + c.rho * e


def sphere_surface_coeff(N: int) -> float:
    """Surface measure of the unit sphere in R^(N-1)."""
    if N < 3:
        raise ConfigError(f"need N >= 3, got {N}")
    return 2.0 * math.pi ** ((N - 1) / 2.0) / math.gamma((N - 1) / 2.0)


def unit_sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


@dataclass
class Geometry:
    """Axial offsets and distances at a batch of nodes.

    ``t1``, ``t2`` and ``tm`` are the axial coordinates measured from a1, a2
    and a respectively. Callers build them from exact offsets so that
    distances to a nearby pole keep full relative precision.
    """

    t1: np.ndarray
    t2: np.ndarray
    tm: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.r1 = np.hypot(self.t1, self.rho)
        self.r2 = np.hypot(self.t2, self.rho)
        self.rm = np.hypot(self.tm, self.rho)

    def __len__(self):
        return self.rho.size

    @classmethod
    def from_points(cls, x, cfg: BipolarConfig) -> "Geometry":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d1 = x - cfg.a1
        d2 = x - cfg.a2
        dm = x - cfg.a
        tm = dm @ cfg.axis
        rho = np.linalg.norm(dm - tm[:, None] * cfg.axis, axis=1)
        g = cls(d1 @ cfg.axis, d2 @ cfg.axis, tm, rho)
        # full-dimensional norms are more accurate than hypot of projections
        g.r1 = np.linalg.norm(d1, axis=1)
        g.r2 = np.linalg.norm(d2, axis=1)
        g.rm = np.linalg.norm(dm, axis=1)
        return g

    @classmethod
    def polar(cls, center: str, r, angle, cfg: BipolarConfig) -> "Geometry":
        """Nodes at distance ``r`` from an axis point, angle measured from +axis."""
        off1, off2, offm = axis_offsets(center, cfg)
        c, s = np.cos(angle), np.sin(angle)
        return cls(off1 + r * c, off2 + r * c, offm + r * c, r * s)


def axis_offsets(center: str, cfg: BipolarConfig) -> tuple[float, float, float]:
    """Axial coordinates of ``center`` relative to (a1, a2, a), exact."""
    h = 0.5 * cfg.M
    return {
        "pole1": (0.0, -cfg.M, -h),
        "pole2": (cfg.M, 0.0, h),
        "midpoint": (h, -h, 0.0),
    }[center]


CENTERS = ("pole1", "pole2", "midpoint")
