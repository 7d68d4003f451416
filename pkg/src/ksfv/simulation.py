"""Time-loop orchestration, initial conditions, and per-step diagnostics.

The drift is refreshed from the current state before every implicit step
(explicit-in-v), and each record tracks the quantities that certify the
structure-preservation properties: total mass, the free energy

    E^n = dx * sum_i [ (D/chi) G(u_i^n) - kappa u_i^n v_i^n ],

the normalized max-norm variation between consecutive steps, and the state
extrema.  kappa is 1 for a prescribed drift and 1/2 for the symmetric
state-coupled drift; the D/chi factor matches the potential
s = (D/chi) g(u) - v used by the fluxes, so the energy sequence is
nonincreasing for the gradient-flow and Scharfetter-Gummel schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .drift import DriftCoupling, drift_from_state
from .fluxes import FluxContext, SchemeKind
from .mesh import Mesh, ProblemCoefficients
from .sensitivity import SensitivityModel
from .solver import SolverConfig, StepFailure, StepStats, advance_one_step

__all__ = [
    "SplitMix64",
    "InitialCondition",
    "initial_condition",
    "RunConfig",
    "DiagnosticsRecord",
    "RunResult",
    "run",
    "energy",
    "steady_state_residual",
    "SteadyStateResidual",
]

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """64-bit SplitMix generator; fully specified, bit-reproducible across platforms."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def symmetric(self) -> float:
        """Uniform double in [-1, 1)."""
        return 2.0 * self.uniform() - 1.0


@dataclass(frozen=True)
class InitialCondition:
    """Initial data specification.

    kind "constant": u = value everywhere.
    kind "constant-plus-noise": u_i = value*(1 + amplitude*xi_i) with xi_i
        in [-1, 1) drawn from SplitMix64(seed), clipped to the admissible
        range (clipping more than 10% of cells is rejected).
    kind "table": explicit per-cell values.
    kind "discrete-steady-state": u_i = g^{-1}((chi/D)(v_i + mu)); for a
        state-coupled drift, v is obtained by fixed-point iteration.  When mu
        is None, target_mass must be given (prescribed drift only) and mu is
        root-found to match it.
    """

    kind: str
    value: float | None = None
    amplitude: float = 0.0
    seed: int = 0
    values: tuple[float, ...] | None = None
    mu: float | None = None
    target_mass: float | None = None


def initial_condition(
    spec: InitialCondition,
    mesh: Mesh,
    model: SensitivityModel,
    coupling: DriftCoupling | None = None,
    coefficients: ProblemCoefficients | None = None,
) -> np.ndarray:
    I = mesh.cell_count
    hi = np.inf if model.upper_bound is None else model.upper_bound

    if spec.kind == "constant":
        if spec.value is None:
            raise ValueError("constant initial condition requires a value")
        u = np.full(I, float(spec.value))
    elif spec.kind == "constant-plus-noise":
        if spec.value is None:
            raise ValueError("constant-plus-noise initial condition requires a value")
        rng = SplitMix64(spec.seed)
        xi = np.array([rng.symmetric() for _ in range(I)])
        u = spec.value * (1.0 + spec.amplitude * xi)
        clipped = np.count_nonzero((u < 0.0) | (u > hi))
        if clipped > 0.10 * I:
            raise ValueError(
                f"noise amplitude {spec.amplitude} pushes {clipped}/{I} cells out of range"
            )
        u = np.clip(u, 0.0, hi)
    elif spec.kind == "table":
        if spec.values is None:
            raise ValueError("table initial condition requires values")
        u = np.asarray(spec.values, dtype=float)
        if u.shape != (I,):
            raise ValueError(f"table has {u.size} values, mesh has {I} cells")
    elif spec.kind == "discrete-steady-state":
        if coupling is None or coefficients is None:
            raise ValueError("discrete-steady-state requires the drift coupling and coefficients")
        u = _steady_profile(spec, mesh, model, coupling, coefficients)
    else:
        raise ValueError(f"unknown initial condition kind {spec.kind!r}")

    if np.any(u < 0.0) or np.any(u > hi):
        raise ValueError("initial data leaves the admissible range")
    return u


def _steady_profile(spec, mesh, model, coupling, coefficients) -> np.ndarray:
    chi_over_d = 1.0 / coefficients.ratio

    def profile(mu: float, v: np.ndarray) -> np.ndarray:
        return np.asarray(model.g_inverse(chi_over_d * (v + mu)))

    if coupling.mode == "prescribed":
        v = drift_from_state(coupling, mesh, np.zeros(mesh.cell_count))
        if spec.mu is not None:
            return profile(spec.mu, v)
        if spec.target_mass is None:
            raise ValueError("discrete-steady-state needs mu or target_mass")

        def mass_gap(mu: float) -> float:
            return mesh.dx * float(np.sum(profile(mu, v))) - spec.target_mass

        lo, hi_ = -1.0, 1.0
        while mass_gap(lo) > 0:
            lo *= 2.0
        while mass_gap(hi_) < 0:
            hi_ *= 2.0
        mu = brentq(mass_gap, lo, hi_, xtol=1e-14, rtol=8.9e-16)
        return profile(mu, v)

    if spec.mu is None:
        raise ValueError("state-coupled steady profiles require an explicit mu")
    u = np.full(mesh.cell_count, max(model.anchor, 1e-3))
    for _ in range(100_000):
        v = drift_from_state(coupling, mesh, u)
        u_next = profile(spec.mu, v)
        if float(np.max(np.abs(u_next - u))) <= 1e-12:
            return u_next
        u = u_next
    raise ValueError(
        "steady-profile fixed point did not converge; the constant state may be "
        "Turing-unstable at these coefficients (supply a table instead)"
    )


def energy(
    u: np.ndarray,
    coupling: DriftCoupling,
    model: SensitivityModel,
    mesh: Mesh,
    coefficients: ProblemCoefficients,
    v: np.ndarray | None = None,
) -> float:
    """Discrete free energy dx * sum[(D/chi) G(u) - kappa u v]."""
    if v is None:
        v = drift_from_state(coupling, mesh, u)
    G = np.asarray(model.G(np.asarray(u, dtype=float)))
    return mesh.dx * float(np.sum(coefficients.ratio * G - coupling.kappa * u * v))


class SteadyStateResidual(NamedTuple):
    value: float
    plateau: bool


def steady_state_residual(
    u: np.ndarray,
    coupling: DriftCoupling,
    model: SensitivityModel,
    mesh: Mesh,
    coefficients: ProblemCoefficients,
) -> SteadyStateResidual:
    """Deviation of g(u_i) - (chi/D) v_i from its mean; zero iff u is flux-free.

    States touching the range boundary (where g diverges) report an infinite
    sentinel with the plateau flag set.
    """
    u = np.asarray(u, dtype=float)
    hi = np.inf if model.upper_bound is None else model.upper_bound
    if np.any(u <= 0.0) or np.any(u >= hi):
        return SteadyStateResidual(np.inf, True)
    v = drift_from_state(coupling, mesh, u)
    s = np.asarray(model.g(u)) - v / coefficients.ratio
    return SteadyStateResidual(float(np.max(np.abs(s - np.mean(s)))), False)


@dataclass(frozen=True)
class RunConfig:
    mesh: Mesh
    scheme: SchemeKind
    model: SensitivityModel
    coupling: DriftCoupling
    coefficients: ProblemCoefficients
    dt: float
    t_final: float
    initial: InitialCondition
    snapshot_every: int = 100
    diagnostics_every: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if not (self.dt > 0 and self.t_final > 0):
            raise ValueError("dt and t_final must be positive")
        if self.snapshot_every < 1 or self.diagnostics_every < 1:
            raise ValueError("output cadences must be >= 1")

    @property
    def step_count(self) -> int:
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    linf_variation: float
    min_u: float
    max_u: float
    newton_iters: int
    fallback_used: bool


@dataclass
class RunResult:
    config: RunConfig
    snapshot_times: list[float]
    snapshots: list[np.ndarray]
    records: list[DiagnosticsRecord]

    @property
    def final_state(self) -> np.ndarray:
        return self.snapshots[-1]


def run(config: RunConfig) -> RunResult:
    """Advance ceil(T/dt) implicit steps, refreshing v from u before each one."""
    mesh, model, coupling, coeff = config.mesh, config.model, config.coupling, config.coefficients
    u = initial_condition(config.initial, mesh, model, coupling, coeff)
    n_steps = config.step_count

    result = RunResult(config=config, snapshot_times=[], snapshots=[], records=[])
    variation = math.nan
    stats = StepStats()

    for k in range(n_steps + 1):
        t = k * config.dt
        v = drift_from_state(coupling, mesh, u)
        if k % config.diagnostics_every == 0 or k == n_steps:
            result.records.append(
                DiagnosticsRecord(
                    t=t,
                    mass=mesh.dx * float(np.sum(u)),
                    energy=energy(u, coupling, model, mesh, coeff, v=v),
                    linf_variation=variation,
                    min_u=float(np.min(u)),
                    max_u=float(np.max(u)),
                    newton_iters=stats.newton_iters,
                    fallback_used=stats.used_fallback,
                )
            )
        if k % config.snapshot_every == 0 or k == n_steps:
            result.snapshot_times.append(t)
            result.snapshots.append(u.copy())
        if k == n_steps:
            break

        ctx = FluxContext(
            u_old=u, v_old=v, model=model, mesh=mesh, coefficients=coeff, dt=config.dt
        )
        try:
            u_next, stats = advance_one_step(ctx, config.scheme, config.solver)
        except StepFailure as exc:
            raise StepFailure(f"step {k + 1} (t={t + config.dt:g}) failed: {exc}") from exc
        norm_prev = float(np.max(np.abs(u)))
        diff = float(np.max(np.abs(u_next - u)))
        if norm_prev > 0.0:
            variation = diff / norm_prev
        else:
            variation = 0.0 if diff == 0.0 else math.inf
        u = u_next

    return result
