"""Implicit-step solvers: damped Newton fast path and monotone pseudo-time fallback.

Each backward-Euler step requires solving the nonlinear system

    u_i - u_i^n + (dt/dx) [F_{i+1/2}(u) - F_{i-1/2}(u)] = 0.

The upwinded fluxes make the system monotone (dF/du_left >= 0,
dF/du_right <= 0), so a subsolution/supersolution pair brackets the unique
solution: 0 is always a subsolution, and the saturation value M (logistic
class) or a constant-potential profile g^{-1}(C + (chi/D) v^n) (unbounded
class) is a supersolution.  Newton iterates are projected onto this bracket;
if Newton stalls, an explicit pseudo-time integration of du/dtau = -residual
from one end of the bracket converges monotonically to the same solution and
doubles as an independent oracle.

After convergence the returned state is recomputed in flux form,
u^{n+1} = u^n - (dt/dx) (F_{i+1/2} - F_{i-1/2}), so the cell sum telescopes
and mass is conserved to rounding regardless of the residual tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .fluxes import (
    FluxContext,
    SchemeKind,
    flux_divergence,
    flux_jacobian_band,
    interface_fluxes,
    residual_and_jacobian,
    step_residual,
)

__all__ = [
    "SolverConfig",
    "StepStats",
    "NewtonDidNotConverge",
    "PseudoTimeDidNotConverge",
    "StepFailure",
    "build_bracket",
    "newton_step_solve",
    "monotone_pseudo_time_solve",
    "advance_one_step",
]


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration caps for one implicit step."""

    residual_tol: float = 1e-10
    #: the strongly aggregating exponential-sensitivity steps need ~90
    #: damped iterations; 50 is not enough for the benchmark runs
    max_newton_iters: int = 200
    #: fixed pseudo-time step; None selects 0.9 / max diagonal of the
    #: residual Jacobian, refreshed every 100 accepted steps
    pseudo_time_step: float | None = None
    max_pseudo_steps: int = 1_000_000
    #: supersolution constant for the unbounded class; None picks the
    #: smallest C with g^{-1}(C + (chi/D) v^n) >= u^n plus a unit margin
    bracket_constant: float | None = None

    def __post_init__(self) -> None:
        if not (self.residual_tol > 0):
            raise ValueError("residual_tol must be positive")
        if self.max_newton_iters <= 0 or self.max_pseudo_steps <= 0:
            raise ValueError("iteration caps must be positive")


@dataclass
class StepStats:
    newton_iters: int = 0
    pseudo_steps: int = 0
    used_fallback: bool = False
    residual_norm: float = np.nan


class NewtonDidNotConverge(RuntimeError):
    """Newton stalled; the caller should fall back to pseudo-time."""


class PseudoTimeDidNotConverge(RuntimeError):
    """Pseudo-time hit its step cap; carries the last iterate and residual norm."""

    def __init__(self, message: str, last_iterate: np.ndarray, residual_norm: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_norm = residual_norm


class StepFailure(RuntimeError):
    """Both solver paths failed for one implicit step."""


def _tolerance(ctx: FluxContext, cfg: SolverConfig) -> float:
    return cfg.residual_tol * max(1.0, float(np.max(np.abs(ctx.u_old))))


def build_bracket(
    ctx: FluxContext,
    u_old: np.ndarray | None = None,
    bracket_constant: float | None = None,
    margin: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Subsolution (all zeros) and supersolution bracketing the implicit solution.

    For the logistic class the supersolution is the constant M.  Otherwise it
    is the zero-flux profile g^{-1}(C + (chi/D) v^n) with C chosen so the
    profile dominates u^n; this requires g to be unbounded above.
    """
    model = ctx.model
    u_old = ctx.u_old if u_old is None else np.asarray(u_old, dtype=float)
    I = ctx.mesh.cell_count
    sub = np.zeros(I)
    if model.upper_bound is not None:
        return sub, np.full(I, model.upper_bound)

    chi_over_d = 1.0 / ctx.coefficients.ratio
    if bracket_constant is None:
        floor = np.maximum(u_old, model.anchor)
        g_floor = np.asarray(model.g(floor))
        bracket_constant = float(np.max(g_floor - chi_over_d * ctx.v_centered)) + margin
    try:
        super_ = np.asarray(model.g_inverse(bracket_constant + chi_over_d * ctx.v_centered))
    except ValueError as exc:
        raise ValueError(
            "cannot build a supersolution: the model's entropy potential is "
            "bounded above (unbounded-range models must have g -> inf)"
        ) from exc
    if np.any(super_ < u_old):
        raise ValueError("supersolution does not dominate the previous state")
    return sub, super_


def _norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r)))


def _polish(ctx, scheme, u, r, norm, sub, super_, floor: float) -> tuple[np.ndarray, float, int]:
    """A few undamped Newton steps to push the residual toward rounding level."""
    extra = 0
    for _ in range(2):
        if norm <= floor:
            break
        try:
            ab = flux_jacobian_band(ctx, u, scheme)
            delta = solve_banded((1, 1), ab, -r)
        except (LinAlgError, ValueError):
            break
        u_try = np.clip(u + delta, sub, super_)
        r_try = step_residual(ctx, u_try, scheme)
        norm_try = _norm(r_try)
        if not np.isfinite(norm_try) or norm_try >= norm:
            break
        u, r, norm = u_try, r_try, norm_try
        extra += 1
    return u, norm, extra


def newton_step_solve(
    ctx: FluxContext,
    scheme: SchemeKind,
    cfg: SolverConfig,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, StepStats]:
    """Damped, bracket-projected Newton solve of one implicit step.

    Converges to residual_tol (scaled by the state magnitude).  On very stiff
    steps the residual cannot be evaluated below its rounding floor; a stall
    within 100x the tolerance is accepted as converged-to-floor, anything
    worse raises NewtonDidNotConverge so the caller can fall back to
    pseudo-time.
    """
    sub, super_ = build_bracket(ctx, bracket_constant=cfg.bracket_constant)
    tol = _tolerance(ctx, cfg)
    u = np.clip(ctx.u_old if initial is None else initial, sub, super_)
    r, ab = residual_and_jacobian(ctx, u, scheme)
    norm = _norm(r)
    stats = StepStats()
    stalled = False

    for _ in range(cfg.max_newton_iters):
        if norm <= tol:
            break
        try:
            delta = solve_banded((1, 1), ab, -r)
        except (LinAlgError, ValueError) as exc:
            raise NewtonDidNotConverge(f"linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise NewtonDidNotConverge("non-finite Newton direction")

        lam = 1.0
        while True:
            u_try = np.clip(u + lam * delta, sub, super_)
            r_try = step_residual(ctx, u_try, scheme)
            norm_try = _norm(r_try)
            if np.isfinite(norm_try) and (norm_try <= (1.0 - 1e-4 * lam) * norm or norm_try <= tol):
                u, norm = u_try, norm_try
                r, ab = residual_and_jacobian(ctx, u, scheme)
                break
            lam *= 0.5
            if lam < 1e-10:
                stalled = True
                break
        if stalled:
            break
        stats.newton_iters += 1

    if norm > tol and norm > 100.0 * tol:
        reason = "line search stalled" if stalled else f"iteration cap {cfg.max_newton_iters}"
        raise NewtonDidNotConverge(f"{reason} at residual {norm:.3e} (tol {tol:.3e})")

    u, norm, extra = _polish(ctx, scheme, u, r, norm, sub, super_, floor=1e-14 * max(1.0, norm))
    stats.newton_iters += extra
    stats.residual_norm = norm
    return u, stats


def _verified_start(
    ctx: FluxContext,
    scheme: SchemeKind,
    cfg: SolverConfig,
    start: str,
) -> np.ndarray:
    slack = 10.0 * _tolerance(ctx, cfg)
    if start == "sub":
        sub, _ = build_bracket(ctx, bracket_constant=cfg.bracket_constant)
        r = step_residual(ctx, sub, scheme)
        if np.max(r) > slack:
            raise ValueError("zero state is not a subsolution (is u_old nonnegative?)")
        return sub
    if start != "super":
        raise ValueError(f"start must be 'sub' or 'super', got {start!r}")
    # escalate the supersolution margin if the residual-sign check fails
    # (can happen for the upwind scheme, whose fluxes do not vanish on
    # constant-potential profiles)
    margin = 1.0
    for _ in range(8):
        _, super_ = build_bracket(ctx, bracket_constant=cfg.bracket_constant, margin=margin)
        r = step_residual(ctx, super_, scheme)
        if np.min(r) > -slack:
            return super_
        if cfg.bracket_constant is not None or ctx.model.upper_bound is not None:
            break
        margin *= 4.0
    raise ValueError("could not verify a supersolution for this scheme and state")


def monotone_pseudo_time_solve(
    ctx: FluxContext,
    scheme: SchemeKind,
    cfg: SolverConfig,
    start: str = "sub",
    trajectory: list | None = None,
) -> tuple[np.ndarray, StepStats]:
    """Integrate du/dtau = -residual(u) from one end of the bracket.

    A step is accepted only if the iterate stays a sub/supersolution (the
    residual keeps its sign up to rounding slack); otherwise the pseudo-time
    step is halved and the step retried.  In the default adaptive mode the
    step also doubles after every 50 accepted steps, so early halvings do not
    pin the flow.  (A policy based on the Jacobian diagonal fails here: at
    clamped saturation states the diagonal is inflated by the 1e-14 clamp
    layer and would dictate 1e-24 steps.)  Accepted iterates are monotone:
    nondecreasing from the subsolution, nonincreasing from the supersolution.
    Pass a list as `trajectory` to record every accepted iterate.
    """
    sub, super_ = build_bracket(ctx, bracket_constant=cfg.bracket_constant)
    u = _verified_start(ctx, scheme, cfg, start)
    super_ = np.maximum(super_, u)  # margin escalation may have enlarged it
    tol = _tolerance(ctx, cfg)
    slack = 1e-12 * max(1.0, _norm(ctx.u_old))
    sign = 1.0 if start == "sub" else -1.0
    adaptive = cfg.pseudo_time_step is None
    stats = StepStats(used_fallback=True)

    r = step_residual(ctx, u, scheme)
    norm = _norm(r)
    dtau = 1.0 if adaptive else cfg.pseudo_time_step
    if trajectory is not None:
        trajectory.append(u.copy())

    while norm > tol:
        if stats.pseudo_steps >= cfg.max_pseudo_steps:
            raise PseudoTimeDidNotConverge(
                f"pseudo-time cap {cfg.max_pseudo_steps} reached (residual {norm:.3e})",
                last_iterate=u,
                residual_norm=norm,
            )
        u_next = np.clip(u - dtau * r, sub, super_)
        r_next = step_residual(ctx, u_next, scheme)
        if np.max(sign * r_next) > slack:
            # the proposal left the sub/supersolution set: shrink and retry
            dtau *= 0.5
            if dtau < 1e-300:
                raise PseudoTimeDidNotConverge(
                    "pseudo-time step underflow", last_iterate=u, residual_norm=norm
                )
            continue
        u, r = u_next, r_next
        norm = _norm(r)
        stats.pseudo_steps += 1
        if trajectory is not None:
            trajectory.append(u.copy())
        if adaptive and stats.pseudo_steps % 50 == 0:
            dtau *= 2.0
    stats.residual_norm = norm
    return u, stats


def _repair_bounds(u: np.ndarray, upper: float | None) -> np.ndarray:
    """Mass-neutral clip of rounding-scale bound violations.

    The flux-form update conserves the cell sum exactly but can leave noise-
    level negatives (or logistic overshoots); clipping those and compensating
    in the cell with the most headroom restores the bounds without touching
    the mass.  Guarded so anything beyond noise scale raises instead.
    """
    budget = 1e-6 * max(1.0, float(np.sum(np.abs(u))))
    deficit = -float(np.sum(u[u < 0.0])) if np.any(u < 0.0) else 0.0
    excess = 0.0
    if upper is not None and np.any(u > upper):
        excess = float(np.sum(u[u > upper] - upper))
    if deficit == 0.0 and excess == 0.0:
        return u
    if deficit + excess > budget:
        raise StepFailure(
            f"bound violations ({deficit + excess:.3e}) exceed the rounding-repair budget"
        )
    u = np.clip(u, 0.0, upper)
    shift = deficit - excess
    k = int(np.argmax(u)) if shift > 0 else int(np.argmin(u))
    u[k] -= shift
    return u


def _substep_context(ctx: FluxContext, u_from: np.ndarray, dt: float) -> FluxContext:
    return FluxContext(
        u_old=u_from,
        v_old=ctx.v_old,
        model=ctx.model,
        mesh=ctx.mesh,
        coefficients=ctx.coefficients,
        dt=dt,
    )


def _newton_with_continuation(
    ctx: FluxContext, scheme: SchemeKind, cfg: SolverConfig
) -> tuple[np.ndarray, StepStats]:
    """Newton, warm-started by composing implicit substeps when the plain solve stalls.

    The substep composition (same explicit drift) only supplies the initial
    guess; the accepted iterate always solves the full-dt system.
    """
    try:
        return newton_step_solve(ctx, scheme, cfg)
    except NewtonDidNotConverge:
        pass

    total_iters = 0
    last_exc: Exception | None = None
    for n_sub in (2, 4, 8, 16, 32):
        dt_sub = ctx.dt / n_sub
        guess = ctx.u_old
        try:
            for _ in range(n_sub):
                guess, sub_stats = newton_step_solve(
                    _substep_context(ctx, guess, dt_sub), scheme, cfg
                )
                total_iters += sub_stats.newton_iters
            u, stats = newton_step_solve(ctx, scheme, cfg, initial=guess)
        except NewtonDidNotConverge as exc:
            last_exc = exc
            continue
        stats.newton_iters += total_iters
        return u, stats
    raise NewtonDidNotConverge(
        f"no convergence even with substep continuation ({last_exc})"
    )


def advance_one_step(
    ctx: FluxContext,
    scheme: SchemeKind,
    cfg: SolverConfig | None = None,
) -> tuple[np.ndarray, StepStats]:
    """One implicit Euler step: Newton (with continuation), then pseudo-time fallback.

    The returned state is the flux-form update evaluated at the converged
    iterate, so the cell sum telescopes and mass is conserved to rounding;
    noise-level bound violations left by that update are repaired
    mass-neutrally, so positivity (and the logistic bound) hold as well.
    """
    cfg = cfg or SolverConfig()
    stats: StepStats
    try:
        u, stats = _newton_with_continuation(ctx, scheme, cfg)
    except NewtonDidNotConverge as newton_exc:
        try:
            u, stats = monotone_pseudo_time_solve(ctx, scheme, cfg, start="sub")
        except (PseudoTimeDidNotConverge, ValueError) as exc:
            raise StepFailure(
                f"Newton failed ({newton_exc}) and pseudo-time fallback failed ({exc})"
            ) from exc
        stats.used_fallback = True

    F = interface_fluxes(ctx, u, scheme)
    u_final = ctx.u_old - (ctx.dt / ctx.mesh.dx) * flux_divergence(F)
    u_final = _repair_bounds(u_final, ctx.model.upper_bound)
    return u_final, stats
