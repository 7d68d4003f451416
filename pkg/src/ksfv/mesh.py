"""Uniform 1D cell-centered mesh and problem coefficients.

The computational domain follows the shifted convention: cell centers sit at
x_i = i*dx for i = 1..I, so the cells I_i = (x_i - dx/2, x_i + dx/2) tile the
interval (dx/2, (I + 1/2)*dx).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on the unit interval with I cells of width dx = 1/I."""

    cell_count: int
    dx: float = field(init=False)
    centers: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.cell_count < 2:
            raise ValueError(f"cell_count must be >= 2, got {self.cell_count}")
        dx = 1.0 / self.cell_count
        object.__setattr__(self, "dx", dx)
        centers = dx * np.arange(1, self.cell_count + 1, dtype=float)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def interfaces(self) -> np.ndarray:
        """Interior interface positions x_{i+1/2} for i = 1..I-1."""
        return self.centers[:-1] + 0.5 * self.dx


def make_mesh(cell_count: int) -> Mesh:
    """Build the uniform mesh with dx = 1/I and centers i*dx."""
    return Mesh(cell_count=cell_count)


@dataclass(frozen=True)
class ProblemCoefficients:
    """Diffusion coefficient D and chemosensitivity chi, both positive."""

    diffusion: float = 1.0
    chi: float = 1.0

    def __post_init__(self) -> None:
        if not (self.diffusion > 0):
            raise ValueError(f"diffusion must be positive, got {self.diffusion}")
        if not (self.chi > 0):
            raise ValueError(f"chi must be positive, got {self.chi}")

    @property
    def ratio(self) -> float:
        """D/chi, the factor scaling the entropy potential in interface differences."""
        return self.diffusion / self.chi
