import math

import numpy as np
import pytest

from ksfv.fluxes import (
    FluxContext,
    SchemeKind,
    banded_to_dense,
    flux_gradient_flow,
    flux_jacobian_band,
    flux_scharfetter_gummel,
    flux_upwind,
    interface_flux_partials,
    interface_fluxes,
    step_residual,
)
from ksfv.mesh import ProblemCoefficients, make_mesh
from ksfv.sensitivity import ExponentialSensitivity, LinearSensitivity, LogisticSensitivity

LINEAR = LinearSensitivity()
LOGISTIC = LogisticSensitivity(1.0)
EXPONENTIAL = ExponentialSensitivity()
ALL_MODELS = [LINEAR, LOGISTIC, EXPONENTIAL]
UNIT = ProblemCoefficients(1.0, 1.0)


def make_ctx(u_old, v_old, model=LINEAR, coeff=UNIT, dt=0.1):
    u_old = np.asarray(u_old, dtype=float)
    mesh = make_mesh(len(u_old))
    return FluxContext(u_old=u_old, v_old=np.asarray(v_old, dtype=float),
                       model=model, mesh=mesh, coefficients=coeff, dt=dt)


def random_admissible(model, rng, n):
    hi = model.upper_bound if model.upper_bound is not None else 3.0
    return 0.02 + (hi - 0.04) * rng.random(n)


# ------------------------------------------------------------ zero-flux states

@pytest.mark.parametrize("scheme", SchemeKind)
@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_constant_state_constant_drift_zero_flux(scheme, model):
    c = 0.4 if model.upper_bound else 1.3
    ctx = make_ctx(np.full(8, c), np.full(8, 0.7), model=model)
    F = interface_fluxes(ctx, np.full(8, c), scheme)
    np.testing.assert_allclose(F, 0.0, atol=1e-14)


@pytest.mark.parametrize("scheme", [SchemeKind.GRADIENT_FLOW, SchemeKind.SCHARFETTER_GUMMEL])
@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_discrete_steady_states_are_flux_free(scheme, model):
    # states with g(u_i) = v_i + mu (unit coefficients) must give zero flux
    rng = np.random.default_rng(11)
    v = rng.random(12)
    mu = 0.3
    u = np.asarray(model.g_inverse(v + mu))
    ctx = make_ctx(u, v, model=model)
    F = interface_fluxes(ctx, u, scheme)
    np.testing.assert_allclose(F, 0.0, atol=1e-13)


def test_upwind_does_not_preserve_entropy_steady_states():
    rng = np.random.default_rng(11)
    v = rng.random(12)
    u = np.asarray(LINEAR.g_inverse(v + 0.3))
    ctx = make_ctx(u, v, model=LINEAR)
    F = interface_fluxes(ctx, u, SchemeKind.UPWIND)
    assert np.max(np.abs(F)) > 1e-4


# ------------------------------------------------------------ hand-computed values

def test_gradient_flow_two_cell_hand_value():
    # linear phi, unit coefficients, u = (1, e), v = 0: s = (0, 1), donor is the
    # right cell, phi_up = e, so F = -(e/dx) * 1 with dx = 1/2
    ctx = make_ctx([1.0, math.e], [0.0, 0.0], model=LINEAR, dt=1.0)
    F = flux_gradient_flow(ctx, np.array([1.0, math.e]), 1)
    assert F == pytest.approx(-2.0 * math.e, rel=1e-14)


def test_upwind_pure_drift_hand_value():
    # u = 1, increasing v: diffusion difference vanishes, F = (v_{i+1}-v_i)/dx
    v = np.array([0.0, 0.1, 0.3, 0.35])
    ctx = make_ctx(np.ones(4), v, model=LINEAR, dt=1.0)
    u = np.ones(4)
    for i in (1, 2, 3):
        expected = (v[i] - v[i - 1]) * 4.0
        assert flux_upwind(ctx, u, i) == pytest.approx(expected, rel=1e-14)


def test_scharfetter_gummel_reduces_to_central_diffusion():
    # linear phi, v = 0, unit coefficients, u_new = u_old: the exponential
    # weights cancel algebraically and the flux is exactly -(u_r - u_l)/dx
    rng = np.random.default_rng(2)
    u = 0.5 + rng.random(16)
    ctx = make_ctx(u, np.zeros(16), model=LINEAR, dt=0.5)
    F = interface_fluxes(ctx, u, SchemeKind.SCHARFETTER_GUMMEL)
    np.testing.assert_allclose(F, -(u[1:] - u[:-1]) * 16.0, rtol=1e-12, atol=1e-12)


# ------------------------------------------------------------ boundary handling

@pytest.mark.parametrize("flux", [flux_gradient_flow, flux_scharfetter_gummel, flux_upwind])
@pytest.mark.parametrize("i", [0, 8, -1])
def test_boundary_interfaces_rejected(flux, i):
    ctx = make_ctx(np.ones(8), np.zeros(8))
    with pytest.raises(ValueError):
        flux(ctx, np.ones(8), i)


@pytest.mark.parametrize("scheme", SchemeKind)
def test_degenerate_plateau_values_give_finite_fluxes(scheme):
    # exact 0 and M entries: interpolant factors vanish before g diverges
    u = np.array([0.0, 0.0, 0.4, 1.0, 1.0, 0.2])
    v = np.linspace(0.0, 0.5, 6)
    ctx = make_ctx(u, v, model=LOGISTIC, dt=1.0)
    F = interface_fluxes(ctx, u, scheme)
    assert np.all(np.isfinite(F))
    assert F[0] == 0.0  # both cells at the lower plateau


# ------------------------------------------------------------ consistency

@pytest.mark.parametrize("model", [LINEAR, EXPONENTIAL], ids=lambda m: m.kind)
@pytest.mark.parametrize("scheme", SchemeKind)
def test_flux_consistency_with_continuous_current(model, scheme):
    # manufactured profiles: all three fluxes converge (at least first order)
    # to -[D u' - chi phi(u) v'] at the interfaces
    coeff = ProblemCoefficients(diffusion=1.3, chi=0.7)

    def u_of(x):
        return 2.0 + np.sin(2 * np.pi * x)

    def du_of(x):
        return 2 * np.pi * np.cos(2 * np.pi * x)

    def v_of(x):
        return np.cos(2 * np.pi * x)

    def dv_of(x):
        return -2 * np.pi * np.sin(2 * np.pi * x)

    errors = []
    for cells in (80, 160, 320):
        mesh = make_mesh(cells)
        u = u_of(mesh.centers)
        v = v_of(mesh.centers)
        ctx = FluxContext(u_old=u, v_old=v, model=model, mesh=mesh, coefficients=coeff, dt=1.0)
        F = interface_fluxes(ctx, u, scheme)
        xi = mesh.interfaces
        exact = -(coeff.diffusion * du_of(xi) - coeff.chi * np.asarray(model.phi(u_of(xi))) * dv_of(xi))
        errors.append(np.max(np.abs(F - exact)))
    assert errors[0] / errors[1] > 1.7
    assert errors[1] / errors[2] > 1.7


# ------------------------------------------------------------ residual and jacobian

@pytest.mark.parametrize("scheme", SchemeKind)
@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_residual_sum_telescopes(scheme, model):
    rng = np.random.default_rng(9)
    u_old = random_admissible(model, rng, 20)
    u_new = random_admissible(model, rng, 20)
    ctx = make_ctx(u_old, rng.random(20), model=model, coeff=ProblemCoefficients(1.0, 2.0), dt=0.25)
    r = step_residual(ctx, u_new, scheme)
    assert np.sum(r) == pytest.approx(np.sum(u_new - u_old), abs=1e-10)


@pytest.mark.parametrize("scheme", SchemeKind)
@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_jacobian_matches_finite_differences(scheme, model):
    rng = np.random.default_rng(42)
    n = 12
    u_old = random_admissible(model, rng, n)
    v_old = rng.random(n)
    ctx = make_ctx(u_old, v_old, model=model, coeff=ProblemCoefficients(1.0, 2.0), dt=0.3)
    u_new = random_admissible(model, rng, n)
    J = banded_to_dense(flux_jacobian_band(ctx, u_new, scheme))
    h = 1e-7
    J_fd = np.zeros_like(J)
    for j in range(n):
        up, um = u_new.copy(), u_new.copy()
        up[j] += h
        um[j] -= h
        J_fd[:, j] = (step_residual(ctx, up, scheme) - step_residual(ctx, um, scheme)) / (2 * h)
    scale = max(1.0, np.max(np.abs(J)))
    assert np.max(np.abs(J - J_fd)) / scale <= 1e-6


@pytest.mark.parametrize("scheme", SchemeKind)
def test_jacobian_columns_sum_to_one(scheme):
    rng = np.random.default_rng(5)
    u_old = 0.1 + 0.8 * rng.random(15)
    ctx = make_ctx(u_old, rng.random(15), model=LOGISTIC, dt=0.7)
    J = banded_to_dense(flux_jacobian_band(ctx, 0.1 + 0.8 * rng.random(15), scheme))
    np.testing.assert_allclose(J.sum(axis=0), 1.0, atol=1e-11)


@pytest.mark.parametrize("scheme", SchemeKind)
def test_jacobian_rows_sum_to_one_at_flat_state(scheme):
    ctx = make_ctx(np.full(10, 0.6), np.full(10, 0.2), model=LOGISTIC, dt=0.7)
    J = banded_to_dense(flux_jacobian_band(ctx, np.full(10, 0.6), scheme))
    np.testing.assert_allclose(J.sum(axis=1), 1.0, atol=1e-11)


@pytest.mark.parametrize("scheme", SchemeKind)
@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.kind)
def test_monotone_sign_pattern(scheme, model):
    # dF/du_left >= 0 and dF/du_right <= 0 on random admissible states
    rng = np.random.default_rng(17)
    for _ in range(1000 // 8):
        n = 8
        ctx = make_ctx(
            random_admissible(model, rng, n), rng.random(n),
            model=model, coeff=ProblemCoefficients(0.5 + rng.random(), 0.5 + rng.random()),
            dt=0.1 + rng.random(),
        )
        _, d_left, d_right = interface_flux_partials(ctx, random_admissible(model, rng, n), scheme)
        assert np.all(d_left >= -1e-11)
        assert np.all(d_right <= 1e-11)


def test_flux_context_validates_shapes_and_dt():
    with pytest.raises(ValueError):
        make_ctx(np.ones(5), np.zeros(4))
    with pytest.raises(ValueError):
        make_ctx(np.ones(5), np.zeros(5), dt=0.0)
