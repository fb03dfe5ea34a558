import math
import random

import numpy as np
import pytest

from bipolar_hardy import quadrature as Q
from bipolar_hardy.config import default_config, unit_ball_volume
from bipolar_hardy.experiments import monte_carlo_dirichlet
from bipolar_hardy.extremal import Extremal
from bipolar_hardy.potentials import v_kernel

# independent scipy.integrate.dblquad evaluation in pole-polar coordinates with
# the substitution w = sigma^kappa, frozen here
E_DESK = 5.244532822802263


@pytest.fixture(scope="module")
def desk_energy(desk):
    ext = Extremal(desk)
    grid = Q.graded_mesh(desk)
    E = Q.integrate_biradial(lambda g: ext.grad_norm(g) ** desk.p, grid, desk)
    P = Q.integrate_biradial(lambda g: v_kernel(g, desk) * ext.value(g) ** desk.p, grid, desk)
    return E, P


def test_dirichlet_energy_oracle(desk_energy):
    E, P = desk_energy
    assert E.value == pytest.approx(E_DESK, rel=1e-8)
    assert P.value == pytest.approx(E_DESK, rel=1e-8)
    assert 0 < E.error_estimate < 1e-6 and 0 < P.error_estimate < 1e-6


@pytest.mark.parametrize("N", [3, 4, 5])
def test_ball_volume(N):
    cfg = default_config(N, 2.0)
    grid = Q.graded_mesh(cfg, extra_radii=[cfg.M])
    r = Q.integrate_biradial(lambda g: (g.rm <= cfg.M).astype(float), grid, cfg)
    exact = unit_ball_volume(N) * cfg.M**N
    assert r.value == pytest.approx(exact, rel=1e-10)
    assert Q.ball_volume_check(cfg, cfg.M) == pytest.approx(exact, rel=1e-14)


@pytest.mark.parametrize("N", [3, 4, 6])
def test_gaussian(N):
    cfg = default_config(N, 2.0)
    grid = Q.graded_mesh(cfg, R=40.0)
    r = Q.integrate_biradial(lambda g: np.exp(-(g.tm**2 + g.rho**2)), grid, cfg)
    assert r.value == pytest.approx(math.pi ** (N / 2), rel=1e-9)


def test_polynomial_exact_per_cell(desk):
    # single annulus about a, integrand polynomial in (r, angle) up to the Gauss degree
    grid = Q.shell_grid(desk, "midpoint", [0.5, 1.0], min_cells=1, cells_per_decade=1, n_angular=1)
    # |x - a|^2 over the shell: sigma * (1 - 0.5^6)/6
    r = Q.integrate_biradial(lambda g: g.tm**2 + g.rho**2, grid, desk)
    exact = 2 * math.pi**2 * (1 - 0.5**6) / 6
    assert r.value == pytest.approx(exact, rel=1e-13)


def test_order_independent_summation(desk):
    ext = Extremal(desk)
    grid = Q.graded_mesh(desk, cells_per_decade=4)
    f = lambda g: ext.grad_norm(g) ** desk.p
    cells = Q.cell_contributions(f, grid, desk)
    ref = math.fsum(cells)
    rng = random.Random(3)
    for _ in range(5):
        rng.shuffle(cells)
        assert math.fsum(cells) == ref


def test_refinement_within_estimate(desk):
    ext = Extremal(desk)
    f = lambda g: ext.grad_norm(g) ** desk.p
    grid = Q.graded_mesh(desk, cells_per_decade=4)
    coarse = Q.integrate_biradial(f, grid, desk)
    fine = Q.integrate_biradial(f, grid.refined(), desk)
    assert abs(fine.value - coarse.value) <= coarse.error_estimate


def test_mc_cross_check(desk):
    mc = monte_carlo_dirichlet(desk, n=200000, seed=1)
    assert abs(mc.value - E_DESK) / E_DESK < 1e-2
    assert abs(mc.value - E_DESK) < 5 * mc.std_error


def test_tail_bound_examples(desk):
    # |x|^(-2N) beyond R: sigma-free coefficient C gives C R^-N / N
    assert Q.tail_bound(-8.0, 10.0, 3.0, desk) == pytest.approx(3.0 * 10.0**-4 / 4, rel=1e-15)
    with pytest.raises(Q.DivergentTailError):
        Q.tail_bound(-4.0, 10.0, 1.0, desk)
    with pytest.raises(Q.DivergentTailError):
        Q.core_bound(-4.0, 0.1, 1.0, desk)
    # |grad phi|^p ~ s^-4.5 at infinity for the desk configuration
    decay = desk.p * (2 * desk.beta - 1)
    assert decay == pytest.approx(-4.5)
    assert Q.tail_bound(decay, 100.0, 1.0, desk) == pytest.approx(100.0**-0.5 / 0.5)
    assert Q.model_exponents(desk)["infinity"] == pytest.approx(-0.5)


def test_shell_annulus_volume(desk):
    for c in ("pole1", "pole2", "midpoint", desk.a1):
        r = Q.shell_integral(c, 0.1, 0.3, lambda g: np.ones_like(g.tm), desk)
        exact = unit_ball_volume(4) * (0.3**4 - 0.1**4)
        assert r.value == pytest.approx(exact, rel=1e-12)
    with pytest.raises(ValueError):
        Q.shell_integral(np.array([0.3, 0, 0, 0]), 0.1, 0.3, lambda g: g.tm, desk)
    with pytest.raises(ValueError):
        Q.shell_integral("pole1", 0.3, 0.1, lambda g: g.tm, desk)


def _shells(cfg, deltas):
    ext = Extremal(cfg)
    f = lambda g: ext.grad_norm(g) ** cfg.p
    return np.array([Q.shell_integral("pole1", d / 2, d, f, cfg).value for d in deltas])


def test_shells_p2_constant(linear):
    d = 10.0 ** -np.arange(2, 7)
    s = _shells(linear, d)
    assert s.max() / s.min() < 1.01


def test_shells_translation_invariant(desk):
    from bipolar_hardy.config import make_config
    moved = make_config(4, 3.0, desk.a1 + 5.0, desk.a2 + 5.0)
    d = [1e-3]
    assert _shells(moved, d)[0] == pytest.approx(_shells(desk, d)[0], rel=1e-12)


def test_shells_p3_slope(desk):
    d = 10.0 ** -np.arange(2, 7)
    slope = np.polyfit(np.log(d), np.log(_shells(desk, d)), 1)[0]
    assert slope == pytest.approx(0.25, abs=0.01)


def test_graded_mesh_validation(desk):
    with pytest.raises(ValueError):
        Q.graded_mesh(desk, R=1.0)
    with pytest.raises(ValueError):
        Q.graded_mesh(desk, inner_cutoffs={"pole1": 0.4})
    with pytest.raises(ValueError):
        Q.graded_mesh(desk, inner_cutoffs={"midpoint": 0.0})
    with pytest.raises(ValueError):
        Q.Patch("pole1", [0.0, 0.5, 0.2], [0, 1])


def test_nonfinite_integrand_reports_cell(desk):
    grid = Q.shell_grid(desk, "midpoint", [0.5, 1.0])
    with pytest.raises(Q.QuadratureError) as exc:
        Q.integrate_biradial(lambda g: np.where(g.tm > 0.7, np.nan, 1.0), grid, desk)
    assert exc.value.cell["center"] == "midpoint"


def test_partition_of_unity(desk):
    r = np.linspace(0, 1, 101)
    b = Q.blend(r, 0.5)
    assert np.all(b[r <= 0.25] == 1.0) and np.all(b[r >= 0.5] == 0.0)
    assert np.all(np.diff(b) <= 0)
