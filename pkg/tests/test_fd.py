import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bipolar_hardy.config import default_config
from bipolar_hardy.extremal import Extremal, grad_phi
from bipolar_hardy.fd import (DegenerateGradientError, FDScheme, StencilError, fd_gradient,
                              fd_hessian, fd_p_laplacian, phi_callable, richardson, scheme_for,
                              supersolution_residual, _derivatives, _plap)
from bipolar_hardy.potentials import eval_V


def test_affine_and_quadratic():
    sch = FDScheme(h=1e-3)
    b = np.array([1.0, -2.0, 0.5])
    x = np.array([0.3, 0.1, -0.7])
    assert np.allclose(fd_gradient(lambda X: X @ b + 4.0, x, sch), b, rtol=0, atol=1e-12)
    g = fd_gradient(lambda X: np.sum(X**2, axis=1), x, sch)
    assert np.allclose(g, 2 * x, rtol=1e-8)


def test_laplacian_of_square():
    for N in (3, 4, 6):
        x = np.linspace(0.1, 0.9, N)
        val = fd_p_laplacian(lambda X: np.sum(X**2, axis=1), x, 2.0, FDScheme(h=1e-2))
        assert val == pytest.approx(2 * N, rel=1e-9)


@pytest.mark.parametrize("N,p", [(3, 2.0), (4, 3.0), (5, 1.7), (4, 2.5)])
def test_fundamental_solution(N, p):
    # |x|^((p-N)/(p-1)) is p-harmonic away from 0: radial ODE gives 0
    k = (p - N) / (p - 1)
    f = lambda X: np.linalg.norm(X, axis=1) ** k
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(5, N)):
        lap = fd_p_laplacian(f, x, p, FDScheme(h=1e-3 * np.linalg.norm(x)))
        g = np.linalg.norm(x) ** (k - 1) * abs(k)
        hess_scale = g ** (p - 1) / np.linalg.norm(x)
        assert abs(lap) < 1e-6 * hess_scale


def test_grad_phi_fd(desk):
    ext = Extremal(desk)
    f = phi_callable(desk)
    rng = np.random.default_rng(2)
    for x in rng.normal(size=(20, 4)) * 2:
        ref = grad_phi(x, ext)
        assert np.allclose(fd_gradient(f, x, FDScheme(h=1e-4 * desk.M)), ref, rtol=1e-6)


def test_guard_and_degenerate(desk):
    sch = scheme_for(desk, h=1e-2, guard=0.05)
    with pytest.raises(StencilError):
        fd_gradient(phi_callable(desk), desk.a1 + 0.01, sch)
    with pytest.raises(DegenerateGradientError):
        fd_p_laplacian(lambda X: np.ones(len(X)), np.ones(4), 3.0, FDScheme(h=1e-3))
    with pytest.raises(StencilError):
        fd_gradient(lambda X: np.full(len(X), np.nan), np.ones(3), FDScheme())


def test_richardson_removes_h2():
    vals = [1.0 + 3.0 * h**2 + 5.0 * h**4 for h in (0.1, 0.05, 0.025)]
    assert richardson(vals) == pytest.approx(1.0, abs=1e-12)


def test_supersolution_examples(desk, linear):
    rng = np.random.default_rng(7)
    pts = [desk.a + np.array([0.5, 0, 0, 0]), desk.a + np.array([0.7, 0, 0, 0]),
           desk.a + np.array([3.0, 0, 0, 0])]
    pts += list(rng.normal(size=(20, 4)) * 3)
    for x in pts:
        if min(np.linalg.norm(x - desk.a1), np.linalg.norm(x - desk.a2)) < 0.2:
            continue
        assert abs(supersolution_residual(x, desk)) < 1e-4
    for x in rng.normal(size=(20, 3)) * 3:
        if min(np.linalg.norm(x - linear.a1), np.linalg.norm(x - linear.a2)) < 0.2:
            continue
        assert abs(supersolution_residual(x, linear)) < 1e-4


def test_lambda_invariance(desk):
    x = np.array([0.4, 1.3, -0.2, 0.5])
    r1 = supersolution_residual(x, desk, lam=1.0)
    r2 = supersolution_residual(x, desk, lam=17.0)
    assert r2 == pytest.approx(r1, abs=1e-7)


def test_order_of_accuracy(desk):
    """Residual before extrapolation falls like h^2."""
    f = phi_callable(desk)
    x = np.array([0.3, 0.9, -0.4, 0.2])
    V = eval_V(x, desk).value
    phi = f(x[None, :])[0]
    target = -V * phi ** (desk.p - 1)
    hs = 0.04 * 2.0 ** -np.arange(4)
    errs = []
    for h in hs:
        gv, H = _derivatives(f, x, h, FDScheme(h=h), True)
        errs.append(abs(_plap(gv, H, desk.p, 1e-300) - target))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.3)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_linearity_at_p2(a, b, x):
    x = np.array(x)
    f1 = lambda X: np.sin(X[:, 0]) * X[:, 1]
    f2 = lambda X: np.exp(0.3 * X[:, 2]) + X[:, 0] ** 2
    comb = lambda X: a * f1(X) + b * f2(X)
    sch = FDScheme(h=1e-3)
    g = fd_gradient(comb, x, sch)
    assert np.allclose(g, a * fd_gradient(f1, x, sch) + b * fd_gradient(f2, x, sch), atol=1e-9)
    H = fd_hessian(comb, x, sch)
    assert np.allclose(H, a * fd_hessian(f1, x, sch) + b * fd_hessian(f2, x, sch), atol=1e-7)
