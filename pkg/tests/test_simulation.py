import math

import numpy as np
import pytest

from ksfv.drift import drift_from_state, elliptic_solve, kernel_convolution, prescribed
from ksfv.fluxes import FluxContext, SchemeKind, interface_fluxes
from ksfv.mesh import ProblemCoefficients, make_mesh
from ksfv.sensitivity import LinearSensitivity, LogisticSensitivity
from ksfv.simulation import (
    InitialCondition,
    RunConfig,
    SplitMix64,
    energy,
    initial_condition,
    run,
    steady_state_residual,
)

LINEAR = LinearSensitivity()
LOGISTIC = LogisticSensitivity(1.0)
UNIT = ProblemCoefficients(1.0, 1.0)


# ------------------------------------------------------------ random generator

def test_splitmix_reference_vectors():
    # first outputs of the reference implementation for seeds 1234567 and 0
    gen = SplitMix64(1234567)
    assert [gen.next_uint64() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]
    assert SplitMix64(0).next_uint64() == 16294208416658607535


def test_splitmix_uniform_range():
    gen = SplitMix64(42)
    draws = [gen.symmetric() for _ in range(1000)]
    assert all(-1.0 <= d < 1.0 for d in draws)
    assert min(draws) < -0.9 and max(draws) > 0.9


# ------------------------------------------------------------ initial conditions

def test_constant_initial_condition():
    mesh = make_mesh(100)
    u = initial_condition(InitialCondition(kind="constant", value=1.0), mesh, LINEAR)
    assert np.array_equal(u, np.ones(100))


def test_noise_is_deterministic_per_seed():
    mesh = make_mesh(64)
    spec = InitialCondition(kind="constant-plus-noise", value=0.5, amplitude=0.01, seed=2024)
    u1 = initial_condition(spec, mesh, LOGISTIC)
    u2 = initial_condition(spec, mesh, LOGISTIC)
    assert np.array_equal(u1, u2)
    other = initial_condition(
        InitialCondition(kind="constant-plus-noise", value=0.5, amplitude=0.01, seed=2025),
        mesh, LOGISTIC,
    )
    assert not np.array_equal(u1, other)


def test_noise_stays_in_band():
    mesh = make_mesh(200)
    spec = InitialCondition(kind="constant-plus-noise", value=0.5, amplitude=0.02, seed=1)
    u = initial_condition(spec, mesh, LOGISTIC)
    assert np.all(np.abs(u - 0.5) <= 0.01 + 1e-15)


def test_excessive_noise_rejected():
    mesh = make_mesh(50)
    spec = InitialCondition(kind="constant-plus-noise", value=0.9, amplitude=0.5, seed=3)
    with pytest.raises(ValueError):
        initial_condition(spec, mesh, LOGISTIC)


def test_table_initial_condition():
    mesh = make_mesh(4)
    u = initial_condition(InitialCondition(kind="table", values=(0.1, 0.2, 0.3, 0.4)), mesh, LOGISTIC)
    np.testing.assert_allclose(u, [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ValueError):
        initial_condition(InitialCondition(kind="table", values=(0.1, 0.2)), mesh, LOGISTIC)


def test_steady_state_initial_condition_fp():
    mesh = make_mesh(50)
    coupling = prescribed(lambda x: x * (1 - x))
    coeff = ProblemCoefficients(1.0, 2.0)
    spec = InitialCondition(kind="discrete-steady-state", mu=-0.4)
    u = initial_condition(spec, mesh, LINEAR, coupling, coeff)
    v = drift_from_state(coupling, mesh, u)
    np.testing.assert_allclose(u, np.exp(2.0 * (v - 0.4)), rtol=1e-13)
    ctx = FluxContext(u_old=u, v_old=v, model=LINEAR, mesh=mesh, coefficients=coeff, dt=1.0)
    for scheme in (SchemeKind.GRADIENT_FLOW, SchemeKind.SCHARFETTER_GUMMEL):
        np.testing.assert_allclose(interface_fluxes(ctx, u, scheme), 0.0, atol=1e-12)


def test_steady_state_initial_condition_with_target_mass():
    mesh = make_mesh(50)
    coupling = prescribed(lambda x: np.abs(np.sin(np.pi * x)))
    spec = InitialCondition(kind="discrete-steady-state", target_mass=0.8)
    u = initial_condition(spec, mesh, LINEAR, coupling, UNIT)
    assert mesh.dx * np.sum(u) == pytest.approx(0.8, rel=1e-12)


def test_steady_state_initial_condition_gks_fixed_point():
    # contractive regime (small chi): the alternating iteration settles
    mesh = make_mesh(40)
    coupling = elliptic_solve(mesh)
    coeff = ProblemCoefficients(1.0, 1.0)
    spec = InitialCondition(kind="discrete-steady-state", mu=-0.8)
    u = initial_condition(spec, mesh, LOGISTIC, coupling, coeff)
    residual = steady_state_residual(u, coupling, LOGISTIC, mesh, coeff)
    assert not residual.plateau
    assert residual.value <= 1e-10


def test_steady_state_gks_requires_mu():
    mesh = make_mesh(10)
    with pytest.raises(ValueError):
        initial_condition(
            InitialCondition(kind="discrete-steady-state", target_mass=0.5),
            mesh, LOGISTIC, elliptic_solve(mesh), UNIT,
        )


# ------------------------------------------------------------ diagnostics

def test_energy_prescribed_flat_state():
    mesh = make_mesh(80)
    coupling = prescribed(lambda x: np.zeros_like(x))
    assert energy(np.ones(80), coupling, LINEAR, mesh, UNIT) == pytest.approx(-1.0, rel=1e-12)


def test_energy_zero_state_logistic():
    mesh = make_mesh(30)
    coupling = kernel_convolution(mesh)
    assert energy(np.zeros(30), coupling, LOGISTIC, mesh, UNIT) == 0.0


def test_energy_state_coupled_flat_state():
    # u = 1: G(1) = -1 and v is 1 up to the O(dx) row-sum defect, kappa = 1/2
    mesh = make_mesh(100)
    coupling = kernel_convolution(mesh)
    e = energy(np.ones(100), coupling, LINEAR, mesh, UNIT)
    assert e == pytest.approx(-1.5, abs=0.01)


def test_steady_state_residual_detects_constants_and_perturbations():
    mesh = make_mesh(60)
    coupling = prescribed(lambda x: np.full_like(x, 0.25))
    flat = steady_state_residual(np.full(60, 0.7), coupling, LOGISTIC, mesh, UNIT)
    assert flat.value == pytest.approx(0.0, abs=1e-14)

    coupling2 = prescribed(lambda x: x * (1 - x))
    coeff = ProblemCoefficients(1.0, 2.0)
    v = drift_from_state(coupling2, mesh, np.zeros(60))
    u_star = np.asarray(LINEAR.g_inverse(2.0 * (v + 0.1)))
    exact = steady_state_residual(u_star, coupling2, LINEAR, mesh, coeff)
    assert exact.value <= 1e-10

    rng = np.random.default_rng(12)
    u_pert = u_star * (1.0 + 1e-3 * (2 * rng.random(60) - 1))
    perturbed = steady_state_residual(u_pert, coupling2, LINEAR, mesh, coeff)
    assert 1e-4 <= perturbed.value <= 1e-2


def test_steady_state_residual_flags_plateaus():
    mesh = make_mesh(10)
    coupling = prescribed(lambda x: np.zeros_like(x))
    u = np.linspace(0.0, 0.9, 10)
    result = steady_state_residual(u, coupling, LOGISTIC, mesh, UNIT)
    assert result.plateau
    assert math.isinf(result.value)


# ------------------------------------------------------------ the time loop

def base_config(**overrides):
    mesh = make_mesh(25)
    defaults = dict(
        mesh=mesh,
        scheme=SchemeKind.SCHARFETTER_GUMMEL,
        model=LOGISTIC,
        coupling=elliptic_solve(mesh),
        coefficients=ProblemCoefficients(1.0, 2.0),
        dt=0.25,
        t_final=2.0,
        initial=InitialCondition(kind="constant-plus-noise", value=0.5, amplitude=0.01, seed=9),
        snapshot_every=4,
        diagnostics_every=1,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def test_run_zero_data_stays_zero():
    config = base_config(initial=InitialCondition(kind="constant", value=0.0))
    result = run(config)
    for u in result.snapshots:
        assert np.array_equal(u, np.zeros(25))


def test_run_step_count_and_cadence():
    result = run(base_config())
    assert result.records[-1].t == pytest.approx(2.0)
    assert len(result.records) == 9  # every step plus t = 0
    assert result.snapshot_times == pytest.approx([0.0, 1.0, 2.0])


def test_run_mass_conservation_and_bounds():
    result = run(base_config(t_final=5.0))
    masses = [r.mass for r in result.records]
    assert abs(masses[-1] - masses[0]) <= 1e-10 * masses[0]
    assert min(r.min_u for r in result.records) >= -1e-13
    assert max(r.max_u for r in result.records) <= 1.0 + 1e-13


def test_run_variation_is_relative_max_norm_difference():
    result = run(base_config(t_final=0.5, diagnostics_every=1, snapshot_every=1))
    u0, u1 = result.snapshots[0], result.snapshots[1]
    expected = np.max(np.abs(u1 - u0)) / np.max(np.abs(u0))
    assert result.records[1].linf_variation == pytest.approx(expected, rel=1e-12)
    assert math.isnan(result.records[0].linf_variation)


def test_run_ceil_step_count():
    config = base_config(dt=0.3, t_final=1.0)  # 3.33 -> 4 steps
    assert config.step_count == 4
    result = run(config)
    assert result.records[-1].t == pytest.approx(1.2)
