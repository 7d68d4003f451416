"""Fully discrete interface fluxes for the three schemes, with analytic partials.

All three fluxes approximate the continuous interface current

    F = -[D du/dx - chi*phi(u) dv/dx]

so that the implicit update reads u_i^{n+1} - u_i^n + (dt/dx)(F_{i+1/2} - F_{i-1/2}) = 0
with F_{1/2} = F_{I+1/2} = 0 enforced structurally.  Terms in u are implicit
(time level n+1) and the drift v is explicit (time level n).  Writing
s_j = (D/chi) g(u_j^{n+1}) - v_j^n and r_j = (chi/D) s_j:

    gradient-flow:      F = -(chi/dx) phi_up (s_{i+1} - s_i)
    Scharfetter-Gummel:  F = -(D/dx) w_up (e^{r_{i+1}} - e^{r_i})
    upwind:              F = -(1/dx) [D (u_{i+1} - u_i) - chi phi_up (v_{i+1} - v_i)]

each with the donor-cell interpolant picked by the sign of the driving
difference ("greater or equal" takes the first branch).  All three agree
with the unit-coefficient formulas at D = chi = 1.  The exponential-fitting
flux must carry the unscaled entropy g in its exponents: the interpolant's
vanishing factor psi cancels exactly one power of e^g, so any other scaling
leaves the flux unbounded near saturation (it grows like (M-u)^{1-D/chi}).
The interpolants carry the factor that vanishes on plateaus, so g is only
ever evaluated on values clamped into the open range (clamp width 1e-14)
and exact 0/M states produce exactly zero flux.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .mesh import Mesh, ProblemCoefficients
from .sensitivity import SensitivityModel

__all__ = [
    "SchemeKind",
    "FluxContext",
    "FluxEval",
    "interface_fluxes",
    "interface_flux_partials",
    "flux_gradient_flow",
    "flux_scharfetter_gummel",
    "flux_upwind",
    "step_residual",
    "flux_jacobian_band",
    "banded_to_dense",
]

#: absolute clamp applied to arguments of g (and g') only; interpolant
#: factors stay unclamped so plateau values 0 and M yield zero flux.
EPS_U = 1e-14

#: cap on folded exponents inside Jacobian entries; keeps extreme bracket
#: states representable (only ever active far outside the physical regime).
_EXP_CAP = 690.0


class SchemeKind(str, Enum):
    GRADIENT_FLOW = "gf"
    SCHARFETTER_GUMMEL = "sg"
    UPWIND = "upwind"


@dataclass(frozen=True)
class FluxContext:
    """Frozen per-step data: previous state, explicit drift, model, and step size."""

    u_old: np.ndarray
    v_old: np.ndarray
    model: SensitivityModel
    mesh: Mesh
    coefficients: ProblemCoefficients
    dt: float
    #: v_old minus its mean; only differences of v enter the fluxes, and
    #: removing the bulk value keeps the folded exponents well-conditioned
    v_centered: np.ndarray = field(init=False)
    #: Scharfetter-Gummel interpolant exponent v_j^n - (D/chi) g(u_j^n), cached
    sg_weight_exponent: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        u_old = np.asarray(self.u_old, dtype=float)
        v_old = np.asarray(self.v_old, dtype=float)
        I = self.mesh.cell_count
        if u_old.shape != (I,) or v_old.shape != (I,):
            raise ValueError(f"u_old and v_old must have length {I}")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "u_old", u_old)
        object.__setattr__(self, "v_old", v_old)
        v_centered = v_old - np.mean(v_old)
        v_centered.setflags(write=False)
        object.__setattr__(self, "v_centered", v_centered)
        g_old = self.model.g(self.model.clip_interior(u_old, EPS_U))
        exponent = v_centered / self.coefficients.ratio - np.asarray(g_old)
        exponent.setflags(write=False)
        object.__setattr__(self, "sg_weight_exponent", exponent)


class FluxEval(NamedTuple):
    """Interface fluxes and their partials w.r.t. the two adjacent new values."""

    values: np.ndarray
    d_left: np.ndarray
    d_right: np.ndarray


def _entropy_pieces(ctx: FluxContext, u_new: np.ndarray):
    """Clamped g, its derivative, and the potential s = (D/chi) g - v^n."""
    model = ctx.model
    uc = model.clip_interior(u_new, EPS_U)
    psi_c = np.asarray(model.psi(uc))
    # uc is strictly interior by construction, so the unchecked form is safe
    g = np.asarray(model._g_interior(uc))
    gprime = 1.0 / (uc * psi_c)
    s = ctx.coefficients.ratio * g - ctx.v_centered
    return uc, s, gprime


def _gradient_flow_eval(ctx: FluxContext, u_new: np.ndarray, want_partials: bool) -> FluxEval:
    model, coeff = ctx.model, ctx.coefficients
    dx, gamma, chi = ctx.mesh.dx, coeff.ratio, coeff.chi
    uc, s, gprime = _entropy_pieces(ctx, u_new)
    ul, ur = u_new[:-1], u_new[1:]
    psi = np.asarray(model.psi(u_new))
    psil, psir = psi[:-1], psi[1:]
    ds = s[1:] - s[:-1]

    donor_left = ds <= 0.0
    phi_up = np.where(donor_left, ul * psir, ur * psil)
    F = -(chi / dx) * phi_up * ds
    if not want_partials:
        return FluxEval(F, np.empty(0), np.empty(0))

    dpsi = np.asarray(model.psi_prime(u_new))
    dpsil, dpsir = dpsi[:-1], dpsi[1:]
    gpl, gpr = gprime[:-1], gprime[1:]
    # u*g'(u) evaluated with the same clamp as g itself
    ugp_l = np.minimum(ul * gpl, 1.0 / EPS_U)
    ugp_r = np.minimum(ur * gpr, 1.0 / EPS_U)

    d_left = np.where(
        donor_left,
        -(chi / dx) * psir * ds + (chi * gamma / dx) * psir * ugp_l,
        -(chi / dx) * (ur * dpsil * ds) + (chi * gamma / dx) * ur * psil * gpl,
    )
    d_right = np.where(
        donor_left,
        -(chi / dx) * (ul * dpsir * ds) - (chi * gamma / dx) * ul * psir * gpr,
        -(chi / dx) * psil * ds - (chi * gamma / dx) * psil * ugp_r,
    )
    return FluxEval(F, d_left, d_right)


def _scharfetter_gummel_eval(ctx: FluxContext, u_new: np.ndarray, want_partials: bool) -> FluxEval:
    model, coeff = ctx.model, ctx.coefficients
    dx, D = ctx.mesh.dx, coeff.diffusion
    uc, s, gprime = _entropy_pieces(ctx, u_new)
    # exponents carry the unscaled g: r_j = g(u_j) - (chi/D) v_j = s_j / (D/chi)
    r = s / coeff.ratio
    ul, ur = u_new[:-1], u_new[1:]
    psi = np.asarray(model.psi(u_new))
    psil, psir = psi[:-1], psi[1:]
    dr = r[1:] - r[:-1]

    donor_right = dr >= 0.0
    b = ctx.sg_weight_exponent
    b_d = np.where(donor_right, b[1:], b[:-1])
    u_d = np.where(donor_right, ur, ul)
    psi_o = np.where(donor_right, psil, psir)

    # folded exponents q_j = b_d + r_j; subtract the max so the bracket is in [-1, 1]
    ql = b_d + r[:-1]
    qr = b_d + r[1:]
    m = np.maximum(ql, qr)
    el = np.exp(ql - m)
    er = np.exp(qr - m)
    bracket = er - el

    with np.errstate(divide="ignore"):
        log_ud = np.where(u_d > 0.0, np.log(np.where(u_d > 0.0, u_d, 1.0)), -np.inf)
    coef = np.where(
        u_d > 0.0,
        np.exp(np.minimum(log_ud + m, _EXP_CAP)),
        u_d * np.exp(np.minimum(m, _EXP_CAP)),
    )
    F = -(D / dx) * coef * psi_o * bracket
    if not want_partials:
        return FluxEval(F, np.empty(0), np.empty(0))

    dpsi = np.asarray(model.psi_prime(u_new))
    dpsil, dpsir = dpsi[:-1], dpsi[1:]
    gpl, gpr = gprime[:-1], gprime[1:]
    ugp_l = np.minimum(ul * gpl, 1.0 / EPS_U)
    ugp_r = np.minimum(ur * gpr, 1.0 / EPS_U)
    P = np.exp(np.minimum(m, _EXP_CAP))

    d_left = np.where(
        donor_right,
        -(D / dx) * P * (ur * dpsil * bracket - ur * psil * el * gpl),
        -(D / dx) * P * (psir * bracket - psir * el * ugp_l),
    )
    d_right = np.where(
        donor_right,
        -(D / dx) * P * (psil * bracket + psil * er * ugp_r),
        -(D / dx) * P * (ul * dpsir * bracket + ul * psir * er * gpr),
    )
    return FluxEval(F, d_left, d_right)


def _upwind_eval(ctx: FluxContext, u_new: np.ndarray, want_partials: bool) -> FluxEval:
    model, coeff = ctx.model, ctx.coefficients
    dx, D, chi = ctx.mesh.dx, coeff.diffusion, coeff.chi
    ul, ur = u_new[:-1], u_new[1:]
    psi = np.asarray(model.psi(u_new))
    psil, psir = psi[:-1], psi[1:]
    dv = ctx.v_centered[1:] - ctx.v_centered[:-1]

    donor_left = dv >= 0.0
    phi_up = np.where(donor_left, ul * psir, ur * psil)
    F = -(1.0 / dx) * (D * (ur - ul) - chi * phi_up * dv)
    if not want_partials:
        return FluxEval(F, np.empty(0), np.empty(0))

    dpsi = np.asarray(model.psi_prime(u_new))
    dpsil, dpsir = dpsi[:-1], dpsi[1:]
    d_left = np.where(
        donor_left,
        (D + chi * psir * dv) / dx,
        (D + chi * ur * dpsil * dv) / dx,
    )
    d_right = np.where(
        donor_left,
        -(D - chi * ul * dpsir * dv) / dx,
        -(D - chi * psil * dv) / dx,
    )
    return FluxEval(F, d_left, d_right)


_EVALUATORS = {
    SchemeKind.GRADIENT_FLOW: _gradient_flow_eval,
    SchemeKind.SCHARFETTER_GUMMEL: _scharfetter_gummel_eval,
    SchemeKind.UPWIND: _upwind_eval,
}


def _check_state(ctx: FluxContext, u_new: np.ndarray) -> np.ndarray:
    u_new = np.asarray(u_new, dtype=float)
    if u_new.shape != (ctx.mesh.cell_count,):
        raise ValueError(f"u_new must have length {ctx.mesh.cell_count}")
    return u_new


def interface_fluxes(ctx: FluxContext, u_new: np.ndarray, scheme: SchemeKind) -> np.ndarray:
    """All interior interface fluxes F_{i+1/2}, i = 1..I-1, as one vector."""
    u_new = _check_state(ctx, u_new)
    return _EVALUATORS[SchemeKind(scheme)](ctx, u_new, want_partials=False).values


def interface_flux_partials(ctx: FluxContext, u_new: np.ndarray, scheme: SchemeKind) -> FluxEval:
    """Interface fluxes together with d F_{i+1/2} / d u_i and d F_{i+1/2} / d u_{i+1}."""
    u_new = _check_state(ctx, u_new)
    return _EVALUATORS[SchemeKind(scheme)](ctx, u_new, want_partials=True)


def _flux_at(ctx: FluxContext, u_new: np.ndarray, i: int, scheme: SchemeKind) -> float:
    if not 1 <= i <= ctx.mesh.cell_count - 1:
        raise ValueError(
            f"interface index must lie in 1..{ctx.mesh.cell_count - 1} "
            f"(boundary fluxes are identically zero), got {i}"
        )
    return float(interface_fluxes(ctx, u_new, scheme)[i - 1])


def flux_gradient_flow(ctx: FluxContext, u_new: np.ndarray, i: int) -> float:
    """Gradient-flow flux at interface i+1/2 (i in 1..I-1)."""
    return _flux_at(ctx, u_new, i, SchemeKind.GRADIENT_FLOW)


def flux_scharfetter_gummel(ctx: FluxContext, u_new: np.ndarray, i: int) -> float:
    """Scharfetter-Gummel (exponential-fitting) flux at interface i+1/2."""
    return _flux_at(ctx, u_new, i, SchemeKind.SCHARFETTER_GUMMEL)


def flux_upwind(ctx: FluxContext, u_new: np.ndarray, i: int) -> float:
    """Plain upwind flux at interface i+1/2."""
    return _flux_at(ctx, u_new, i, SchemeKind.UPWIND)


def flux_divergence(fluxes: np.ndarray) -> np.ndarray:
    """Per-cell flux difference F_{i+1/2} - F_{i-1/2} with zero boundary fluxes."""
    out = np.empty(fluxes.size + 1)
    out[0] = fluxes[0]
    out[-1] = -fluxes[-1]
    np.subtract(fluxes[1:], fluxes[:-1], out=out[1:-1])
    return out


def step_residual(ctx: FluxContext, u_new: np.ndarray, scheme: SchemeKind) -> np.ndarray:
    """Residual of the implicit update; its sum telescopes to sum(u_new - u_old)."""
    u_new = _check_state(ctx, u_new)
    F = interface_fluxes(ctx, u_new, scheme)
    return u_new - ctx.u_old + (ctx.dt / ctx.mesh.dx) * flux_divergence(F)


def residual_and_jacobian(
    ctx: FluxContext, u_new: np.ndarray, scheme: SchemeKind
) -> tuple[np.ndarray, np.ndarray]:
    """Residual and its banded Jacobian from a single flux evaluation."""
    u_new = _check_state(ctx, u_new)
    I = ctx.mesh.cell_count
    r = ctx.dt / ctx.mesh.dx
    F, d_left, d_right = interface_flux_partials(ctx, u_new, scheme)

    ab = np.zeros((3, I))
    ab[1, :] = 1.0
    ab[1, :-1] += r * d_left
    ab[1, 1:] -= r * d_right
    ab[0, 1:] = r * d_right
    ab[2, :-1] = -r * d_left
    residual = u_new - ctx.u_old + r * flux_divergence(F)
    return residual, ab


def flux_jacobian_band(ctx: FluxContext, u_new: np.ndarray, scheme: SchemeKind) -> np.ndarray:
    """Tridiagonal residual Jacobian in solve_banded layout (3 rows: super, diag, sub).

    Row 0 holds d res_i / d u_{i+1} in ab[0, i+1], row 1 the diagonal, and
    row 2 d res_{i+1} / d u_i in ab[2, i].  Columns of the dense equivalent
    sum to exactly 1 (telescoping fluxes).
    """
    return residual_and_jacobian(ctx, u_new, scheme)[1]


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    """Expand the (3, I) band into the dense tridiagonal matrix (for tests)."""
    I = ab.shape[1]
    J = np.diag(ab[1])
    J += np.diag(ab[0, 1:], 1)
    J += np.diag(ab[2, :-1], -1)
    return J
