"""Chemotactic sensitivity models and their entropy structure.

A model packages the mobility phi(u) = u*psi(u) together with the entropy
pair (g, G):

    g(u) = integral from a to u of 1/phi,   G(u) = integral from 0 to u of g,

so that g' = 1/phi and G' = g, with G convex and G(0) = 0.  Two classes are
supported: always-positive psi (psi(u) > 0 for u > 0, admissible range
[0, inf), g unbounded above) and logistic-type psi with a saturation value M
(psi(M) = 0, admissible range [0, M], g divergent at both endpoints).

The anchor a only shifts g by a constant, which cancels in every interface
difference; the built-ins use a = 1 (linear, exponential) and a = M/2
(logistic) so that g(a) = 0.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import expi, xlogy

__all__ = [
    "SensitivityModel",
    "LinearSensitivity",
    "LogisticSensitivity",
    "ExponentialSensitivity",
    "CustomSensitivity",
    "sensitivity_phi",
    "entropy_g",
    "entropy_G",
    "entropy_g_inverse",
]

_EI_1 = float(expi(1.0))


def _as_array(u) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    return arr, arr.ndim == 0


def _maybe_scalar(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


class SensitivityModel:
    """Base class for sensitivity models; subclasses fill in psi and the entropy pair."""

    kind: str = "abstract"
    anchor: float = 1.0
    #: saturation value M for logistic-type models, None when psi > 0 on (0, inf)
    upper_bound: float | None = None

    # -- mobility ---------------------------------------------------------

    def psi(self, u):
        raise NotImplementedError

    def psi_prime(self, u):
        raise NotImplementedError

    def phi(self, u):
        """Mobility phi(u) = u*psi(u); raises if u is outside the admissible range."""
        self._check_closed_range(u)
        arr, scalar = _as_array(u)
        return _maybe_scalar(arr * np.asarray(self.psi(arr)), scalar)

    # -- entropy pair ------------------------------------------------------

    def g(self, u):
        """Entropy potential; defined on the open admissible range only."""
        self._check_open_range(u)
        arr, scalar = _as_array(u)
        return _maybe_scalar(self._g_interior(arr), scalar)

    def G(self, u):
        """Convex entropy density with G(0) = 0, defined on the closed range."""
        self._check_closed_range(u)
        arr, scalar = _as_array(u)
        return _maybe_scalar(self._G_closed(arr), scalar)

    def g_inverse(self, y):
        """Unique u with g(u) = y; g maps the open range onto all of R."""
        arr, scalar = _as_array(y)
        if not np.all(np.isfinite(arr)):
            raise ValueError("g_inverse requires finite arguments")
        return _maybe_scalar(self._g_inverse_finite(arr), scalar)

    def _g_interior(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _G_closed(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _g_inverse_finite(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- range handling ----------------------------------------------------

    def clip_interior(self, u, eps: float = 1e-14):
        """Clip u into the open range [eps, M-eps]; used where g must stay finite."""
        upper = None if self.upper_bound is None else self.upper_bound - eps
        return np.clip(u, eps, upper)

    def _check_closed_range(self, u) -> None:
        arr = np.asarray(u, dtype=float)
        hi = np.inf if self.upper_bound is None else self.upper_bound
        if np.any(arr < 0) or np.any(arr > hi):
            raise ValueError(
                f"value outside admissible range [0, {hi}] for {self.kind} sensitivity"
            )

    def _check_open_range(self, u) -> None:
        arr = np.asarray(u, dtype=float)
        hi = np.inf if self.upper_bound is None else self.upper_bound
        if np.any(arr <= 0) or np.any(arr >= hi):
            raise ValueError(
                f"g requires values strictly inside (0, {hi}); got boundary or exterior point"
            )


class LinearSensitivity(SensitivityModel):
    """phi(u) = u, the classical drift-diffusion mobility: g = ln u, G = u ln u - u."""

    kind = "linear"
    anchor = 1.0

    def psi(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(np.ones_like(arr), scalar)

    def psi_prime(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(np.zeros_like(arr), scalar)

    def _g_interior(self, u):
        return np.log(u)

    def _G_closed(self, u):
        return xlogy(u, u) - u

    def _g_inverse_finite(self, y):
        return np.exp(y)


class LogisticSensitivity(SensitivityModel):
    """phi(u) = u*(1 - u/M): volume-filling saturation, solutions confined to [0, M]."""

    kind = "logistic"

    def __init__(self, saturation: float = 1.0) -> None:
        if not (saturation > 0):
            raise ValueError(f"saturation must be positive, got {saturation}")
        self.upper_bound = float(saturation)
        self.anchor = 0.5 * self.upper_bound

    def psi(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(1.0 - arr / self.upper_bound, scalar)

    def psi_prime(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(np.full_like(arr, -1.0 / self.upper_bound), scalar)

    def _g_interior(self, u):
        return np.log(u / (self.upper_bound - u))

    def _G_closed(self, u):
        m = self.upper_bound
        return xlogy(u, u) + xlogy(m - u, m - u) - m * np.log(m)

    def _g_inverse_finite(self, y):
        # inverse of ln(u/(M-u)) is the logistic sigmoid scaled by M
        m = self.upper_bound
        flat = np.atleast_1d(y)
        out = np.empty_like(flat)
        pos = flat >= 0
        out[pos] = m / (1.0 + np.exp(-flat[pos]))
        ey = np.exp(flat[~pos])
        out[~pos] = m * ey / (1.0 + ey)
        return out.reshape(y.shape)


class ExponentialSensitivity(SensitivityModel):
    """phi(u) = u*exp(-u): unbounded range with exponentially decaying mobility.

    g has no elementary form; g(u) = Ei(u) - Ei(1) with Ei the exponential
    integral, which grows like e^u/u and tends to -inf as u -> 0+.
    """

    kind = "exponential"
    anchor = 1.0

    def psi(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(np.exp(-arr), scalar)

    def psi_prime(self, u):
        arr, scalar = _as_array(u)
        return _maybe_scalar(-np.exp(-arr), scalar)

    def _g_interior(self, u):
        return expi(u) - _EI_1

    def _G_closed(self, u):
        # G(u) = u*Ei(u) - e^u + 1 - u*Ei(1); u*Ei(u) -> 0 as u -> 0+
        flat = np.atleast_1d(u)
        out = 1.0 - np.exp(flat) - flat * _EI_1
        pos = flat > 0
        out[pos] += flat[pos] * expi(flat[pos])
        return out.reshape(u.shape)

    def _g_inverse_finite(self, y):
        flat = np.atleast_1d(y).astype(float)
        out = np.empty_like(flat)
        for k, yk in enumerate(flat):
            out[k] = self._invert_scalar(yk)
        return out.reshape(np.shape(y))

    @staticmethod
    def _invert_scalar(y: float) -> float:
        target = y + _EI_1
        lo, hi = 1e-300, 1.0
        f_hi = expi(hi) - target
        while f_hi < 0:
            if hi >= 700.0:
                raise ValueError(f"g_inverse target {y} exceeds floating-point range")
            hi = min(2.0 * hi, 700.0)
            f_hi = expi(hi) - target
        if f_hi == 0.0:
            return hi
        return brentq(lambda u: expi(u) - target, lo, hi, xtol=1e-300, rtol=8.9e-16)


class CustomSensitivity(SensitivityModel):
    """User-supplied psi with numerically integrated entropy pair.

    g and G are evaluated by adaptive quadrature (tolerance 1e-12) and
    g_inverse by bracketed root finding, so any psi >= 0 with psi' <= 0 fits
    the same interface as the built-ins.
    """

    kind = "custom"

    def __init__(
        self,
        psi: Callable[[float], float],
        psi_prime: Callable[[float], float],
        anchor: float = 1.0,
        upper_bound: float | None = None,
    ) -> None:
        self._psi = psi
        self._dpsi = psi_prime
        self.anchor = float(anchor)
        self.upper_bound = None if upper_bound is None else float(upper_bound)

    def psi(self, u):
        arr, scalar = _as_array(u)
        vals = np.asarray([self._psi(x) for x in np.atleast_1d(arr)], dtype=float)
        return _maybe_scalar(vals.reshape(arr.shape), scalar)

    def psi_prime(self, u):
        arr, scalar = _as_array(u)
        vals = np.asarray([self._dpsi(x) for x in np.atleast_1d(arr)], dtype=float)
        return _maybe_scalar(vals.reshape(arr.shape), scalar)

    def _g_scalar(self, u: float) -> float:
        val, _ = quad(
            lambda s: 1.0 / (s * self._psi(s)), self.anchor, u,
            epsabs=1e-12, epsrel=1e-12, limit=200,
        )
        return val

    def _g_interior(self, u):
        flat = np.atleast_1d(u)
        return np.asarray([self._g_scalar(x) for x in flat], dtype=float).reshape(u.shape)

    def _G_closed(self, u):
        flat = np.atleast_1d(u)
        out = np.empty(flat.shape, dtype=float)
        for k, x in enumerate(flat):
            if x == 0.0:
                out[k] = 0.0
            else:
                out[k], _ = quad(self._g_scalar, 0.0, x, epsabs=1e-12, epsrel=1e-12, limit=200)
        return out.reshape(u.shape)

    def _g_inverse_finite(self, y):
        hi_cap = np.inf if self.upper_bound is None else self.upper_bound
        flat = np.atleast_1d(y).astype(float)
        out = np.empty_like(flat)
        for k, yk in enumerate(flat):
            lo, hi = self._bracket(yk, hi_cap)
            out[k] = brentq(lambda u: self._g_scalar(u) - yk, lo, hi, xtol=1e-15, rtol=8.9e-16)
        return out.reshape(np.shape(y))

    def _bracket(self, y: float, hi_cap: float) -> tuple[float, float]:
        lo = self.anchor
        hi = self.anchor
        while self._g_scalar(lo) > y:
            lo = lo / 2.0 if hi_cap is np.inf else 0.5 * lo
            if lo < 1e-200:
                raise ValueError(f"failed to bracket g_inverse target {y} from below")
        while self._g_scalar(hi) < y:
            hi = 2.0 * hi if hi_cap is np.inf else 0.5 * (hi + hi_cap)
            if hi > 1e200:
                raise ValueError(f"failed to bracket g_inverse target {y} from above")
        return lo, hi


# -- operation-style wrappers over the model methods ------------------------

def sensitivity_phi(model: SensitivityModel, u):
    """Mobility phi(u) = u*psi(u) on the closed admissible range."""
    return model.phi(u)


def entropy_g(model: SensitivityModel, u):
    """Entropy potential g(u), strictly inside the admissible range."""
    return model.g(u)


def entropy_G(model: SensitivityModel, u):
    """Convex entropy density G(u) with G(0) = 0."""
    return model.G(u)


def entropy_g_inverse(model: SensitivityModel, y):
    """Inverse of the entropy potential, defined for every finite y."""
    return model.g_inverse(y)
