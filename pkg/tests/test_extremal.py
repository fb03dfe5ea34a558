import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bipolar_hardy.config import Geometry, default_config, make_config
from bipolar_hardy.extremal import (AdmissibilityError, BreakpointError, CutoffFamily, Extremal,
                                    InnerSmoothing, OuterTruncation, PlaneBump, PoleAnnulusBump,
                                    eval_phi, eval_theta, eval_u_eps, grad_phi, grad_theta,
                                    u_eps_field)
from bipolar_hardy.fd import FDScheme, fd_gradient
from bipolar_hardy.potentials import PoleProximityError


def test_phi_examples(desk):
    ext = Extremal(desk)
    cfg = make_config(4, 3.0, [0, -0.5, 0, 0], [0, 0.5, 0, 0])
    x = [math.sqrt(0.75), 0, 0, 0]  # unit distance to both poles
    assert eval_phi(x, Extremal(cfg)) == pytest.approx(1.0, rel=1e-15)
    assert eval_phi([0, 1, 0, 0], ext) == pytest.approx(2 ** -0.25, rel=1e-15)
    assert eval_phi([0, 1, 0, 0], ext) == pytest.approx(0.840896415, rel=1e-9)
    with pytest.raises(PoleProximityError):
        eval_phi(desk.a1, ext)


def test_phi_homogeneity(desk):
    lam = 3.7
    big = make_config(4, 3.0, lam * desk.a1, lam * desk.a2)
    x = np.array([0.3, 1.2, -0.4, 0.9])
    assert eval_phi(lam * x, Extremal(big)) == pytest.approx(
        lam ** (2 * desk.beta) * eval_phi(x, Extremal(desk)), rel=1e-13)


def test_grad_on_bisector_is_radial(desk):
    x = np.array([0.0, 0.7, -0.2, 1.1])
    g = grad_phi(x, Extremal(desk))
    assert np.linalg.norm(np.cross(g[1:], x[1:])) < 1e-14
    assert abs(g[0]) < 1e-15
    assert np.linalg.norm(grad_phi(desk.a, Extremal(desk))) == 0.0


def test_grad_norm_closed_form(desk):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(10000, 4)) * 3
    ext = Extremal(desk)
    g = Geometry.from_points(X, desk)
    closed = ext.grad_norm(g)
    vec = np.array([np.linalg.norm(grad_phi(x, ext)) for x in X])
    assert np.max(np.abs(closed - vec) / vec) < 1e-10
    # the (t, rho) split of the gradient carries the same norm
    _, gt, gr = ext.eval(g)
    assert np.max(np.abs(np.hypot(gt, gr) - vec) / vec) < 1e-10


def test_grad_phi_against_fd(desk):
    ext = Extremal(desk)
    sch = FDScheme(h=1e-4, richardson_levels=2)
    f = lambda X: np.array([eval_phi(x, ext) for x in X])
    rng = np.random.default_rng(8)
    for x in rng.normal(size=(20, 4)) * 2:
        ref = grad_phi(x, ext)
        assert np.allclose(fd_gradient(f, x, sch), ref, rtol=1e-6, atol=1e-9)


def test_biradial_under_axis_rotation(desk):
    ext = Extremal(desk)
    rng = np.random.default_rng(1)
    for x in rng.normal(size=(50, 4)):
        A = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        y = x.copy()
        y[1:] = A @ x[1:]
        assert eval_phi(y, ext) == pytest.approx(eval_phi(x, ext), rel=1e-13)


def test_theta_values(desk):
    eps = 1e-3
    fam = CutoffFamily(desk, eps)
    x = lambda r: desk.a1 + np.array([0, r, 0, 0])
    assert eval_theta(x(eps), fam) == pytest.approx(1.0, abs=1e-12)
    assert eval_theta(x(eps**2), fam) == pytest.approx(0.0, abs=1e-12)
    assert eval_theta(x(eps**0.5), fam) == pytest.approx(0.0, abs=1e-12)
    for e in (1e-2, 1e-3, 3e-5):
        f = CutoffFamily(desk, e)
        assert eval_theta(x(e**1.5), f) == pytest.approx(0.5, abs=1e-12)
    assert eval_theta(x(0.4), fam) == 0.0


def test_theta_admissibility(desk):
    with pytest.raises(AdmissibilityError):
        CutoffFamily(desk, 0.3)  # above (M/4)^2
    with pytest.raises(AdmissibilityError):
        CutoffFamily(desk, 1e-3, r0=0.01)
    with pytest.raises(AdmissibilityError):
        CutoffFamily(desk, 0.0)


def test_theta_gradient_branches(desk):
    eps = 1e-3
    fam = CutoffFamily(desk, eps)
    L = math.log(1 / eps)
    for r, k in ((10 ** -4.5, 1.0), (10 ** -2.0, 2.0)):
        x = desk.a2 + r * np.array([0.6, 0.8, 0, 0])
        assert np.linalg.norm(grad_theta(x, fam)) == pytest.approx(k / (L * r), rel=1e-12)
    with pytest.raises(BreakpointError):
        grad_theta(desk.a1 + np.array([eps, 0, 0, 0]), fam)


def test_theta_gradient_fd(desk):
    fam = CutoffFamily(desk, 1e-2)
    rng = np.random.default_rng(6)
    f = lambda X: np.array([eval_theta(x, fam) for x in X])
    for r in (2e-3, 5e-3, 3e-2, 8e-2):
        d = rng.normal(size=4)
        x = desk.a1 + r * d / np.linalg.norm(d)
        sch = FDScheme(h=1e-3 * r)
        assert np.allclose(fd_gradient(f, x, sch), grad_theta(x, fam), rtol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 5.0), st.floats(-0.2, 0.2))
def test_theta_continuity_and_range(e_exp, jump):
    cfg = default_config(4, 3.0)
    eps = 10.0 ** -e_exp
    fam = CutoffFamily(cfg, eps)
    for b in fam.radii:
        lo, hi = fam.profile(np.array([b * (1 - 1e-13), b * (1 + 1e-13)]))[0]
        assert abs(lo - hi) < 1e-11
    r = np.geomspace(eps**2.5, 1.0, 2000) * (1 + jump * 1e-3)
    th = fam.profile(r)[0]
    assert th.min() >= 0 and th.max() <= 1 + 1e-15


def test_u_eps_support_and_product_rule(desk):
    ext = Extremal(desk)
    eps = 1e-2
    fam = CutoffFamily(desk, eps)
    v, g = eval_u_eps(np.array([0.0, 1.0, 0, 0]), ext, fam)
    assert v == 0.0 and np.all(g == 0)
    v, g = eval_u_eps(desk.a1 + np.array([0, 1e-5, 0, 0]), ext, fam)
    assert v == 0.0
    x = desk.a1 + np.array([0, eps, 0, 0]) * (1 + 1e-9)
    assert eval_u_eps(x, ext, fam)[0] == pytest.approx(eval_phi(x, ext), rel=1e-8)
    f = lambda X: np.array([eval_u_eps(y, ext, fam)[0] for y in X])
    for r in (3e-4, 4e-3, 3e-2):
        x = desk.a2 + r * np.array([0.5, 0.5, 0.5, 0.5])
        sch = FDScheme(h=1e-3 * r)
        assert np.allclose(fd_gradient(f, x, sch), eval_u_eps(x, ext, fam)[1], rtol=1e-6)


def test_field_gradients_match_fd(desk):
    """Vectorized field gradients (t, rho parts) against differencing the values."""
    fields = [Extremal(desk) * OuterTruncation(desk, 3.0),
              Extremal(desk) * InnerSmoothing(desk, 0.05),
              Extremal(desk) * PlaneBump(desk, 0.2, 0.5, 0.25),
              Extremal(desk) * PoleAnnulusBump(desk, 0.1, 0.05),
              u_eps_field(Extremal(desk), CutoffFamily(desk, 1e-2))]
    pts = [(0.3, 0.45), (-0.95, 0.08), (4.1, 2.0), (0.25, 0.6), (1.02, 0.03)]
    h = 1e-6
    for fld in fields:
        for t, rho in pts:
            def val(tt, rr):
                g = Geometry(np.array([tt + 1.0]), np.array([tt - 1.0]), np.array([tt]), np.array([rr]))
                return fld.value(g)[0]
            g = Geometry(np.array([t + 1.0]), np.array([t - 1.0]), np.array([t]), np.array([rho]))
            _, gt, gr = fld.eval(g)
            dt = (val(t + h, rho) - val(t - h, rho)) / (2 * h)
            dr = (val(t, rho + h) - val(t, rho - h)) / (2 * h)
            scale = abs(gt[0]) + abs(gr[0]) + 1e-12
            assert abs(dt - gt[0]) < 1e-5 * scale + 1e-9
            assert abs(dr - gr[0]) < 1e-5 * scale + 1e-9
