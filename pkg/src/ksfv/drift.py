"""Drift field v: prescribed profiles, Green-kernel convolution, or elliptic solve.

In the Fokker-Planck setting v is a fixed nonnegative field.  In the
chemotaxis setting v is slaved to u through the screened Poisson problem

    -v'' + v = u on (0, 1),   v'(0) = v'(1) = 0,

solved either directly (tridiagonal, mirror ghost cells) or through its
Green function K(x, y), a positive symmetric kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solveh_banded

from .mesh import Mesh

__all__ = [
    "kernel_value",
    "kernel_matrix",
    "DriftCoupling",
    "prescribed",
    "kernel_convolution",
    "elliptic_solve",
    "drift_from_state",
]

_LAMBDA = 1.0 / (2.0 * (np.e**2 - 1.0))


def kernel_value(x: float, y: float) -> float:
    """Green function of -v'' + v = u with zero-flux ends of the unit interval.

    K(x, y) = lambda*(e^x + e^-x)*(e^y + e^(2-y)) for x <= y, extended
    symmetrically, with lambda = 1/(2*(e^2 - 1)).
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"kernel arguments must lie in [0, 1], got ({x}, {y})")
    if x > y:
        x, y = y, x
    return _LAMBDA * (np.exp(x) + np.exp(-x)) * (np.exp(y) + np.exp(2.0 - y))


def kernel_matrix(mesh: Mesh) -> np.ndarray:
    """Sample K at all pairs of cell centers; symmetric by construction.

    The upper triangle is evaluated and mirrored so K[i, j] == K[j, i]
    bit-for-bit.
    """
    x = mesh.centers
    ex, emx = np.exp(x), np.exp(-x)
    ey2 = np.exp(2.0 - x)
    K = np.empty((mesh.cell_count, mesh.cell_count))
    for i in range(mesh.cell_count):
        K[i, i:] = _LAMBDA * (ex[i] + emx[i]) * (ex[i:] + ey2[i:])
        K[i:, i] = K[i, i:]
    return K


def _elliptic_bands(mesh: Mesh) -> np.ndarray:
    """Lower band form of the mirror-BC discretization of -v'' + v."""
    I = mesh.cell_count
    a = 1.0 / mesh.dx**2
    bands = np.zeros((2, I))
    bands[0].fill(1.0 + 2.0 * a)
    bands[0, 0] -= a
    bands[0, -1] -= a
    bands[1, :-1] = -a
    return bands


@dataclass(frozen=True)
class DriftCoupling:
    """How v is produced from the state (or from space alone).

    mode "prescribed": v_i = field(x_i), independent of u (kappa = 1).
    mode "kernel": v = K u, optionally weighted by dx so the sum is a
        midpoint quadrature of the convolution integral (kappa = 1/2).
    mode "elliptic": v solves the tridiagonal mirror-BC system (kappa = 1/2).
    """

    mode: str
    field: Callable[[np.ndarray], np.ndarray] | None = None
    matrix: np.ndarray | None = None
    quadrature_weighted: bool = True
    bands: np.ndarray | None = None

    @property
    def kappa(self) -> float:
        """Energy weight: 1 for a prescribed drift, 1/2 for the symmetric coupling."""
        return 1.0 if self.mode == "prescribed" else 0.5


def prescribed(field: Callable[[np.ndarray], np.ndarray]) -> DriftCoupling:
    return DriftCoupling(mode="prescribed", field=field)


def kernel_convolution(mesh: Mesh, quadrature_weighted: bool = True) -> DriftCoupling:
    K = kernel_matrix(mesh)
    K.setflags(write=False)
    return DriftCoupling(mode="kernel", matrix=K, quadrature_weighted=quadrature_weighted)


def elliptic_solve(mesh: Mesh) -> DriftCoupling:
    bands = _elliptic_bands(mesh)
    bands.setflags(write=False)
    return DriftCoupling(mode="elliptic", bands=bands)


def drift_from_state(coupling: DriftCoupling, mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Evaluate v_i from the cell averages u (ignored in prescribed mode)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.cell_count,):
        raise ValueError(f"state length {u.shape} does not match mesh size {mesh.cell_count}")
    if not np.all(np.isfinite(u)):
        raise ValueError("state contains non-finite entries")

    if coupling.mode == "prescribed":
        v = np.asarray(coupling.field(mesh.centers), dtype=float)
        if v.shape != (mesh.cell_count,):
            raise ValueError("prescribed field must return one value per cell center")
        return v
    if coupling.mode == "kernel":
        v = coupling.matrix @ u
        if coupling.quadrature_weighted:
            v *= mesh.dx
        return v
    if coupling.mode == "elliptic":
        return solveh_banded(coupling.bands, u, lower=True)
    raise ValueError(f"unknown coupling mode {coupling.mode!r}")
