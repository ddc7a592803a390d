"""
Channel grid on (0, 2π) × (0, 1): periodic x1, wall-bounded x2
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Grid:
    """Collocated nodes x1 = i·dx1 (i < n1), x2 = j·dx2 (j < n2), walls at j = 0 and j = n2 - 1"""

    n1: int
    n2: int

    L1 = 2.0 * math.pi

    def __post_init__(self):
        if not isinstance(self.n1, (int, np.integer)) or self.n1 < 4 or self.n1 % 2:
            raise ParameterError("n1", f"must be an even integer >= 4, got {self.n1!r}")
        if not isinstance(self.n2, (int, np.integer)) or self.n2 < 3:
            raise ParameterError("n2", f"must be an integer >= 3, got {self.n2!r}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def dx1(self) -> float:
        return self.L1 / self.n1

    @property
    def dx2(self) -> float:
        return 1.0 / (self.n2 - 1)

    @cached_property
    def x1(self) -> np.ndarray:
        return np.arange(self.n1) * self.dx1

    @cached_property
    def x2(self) -> np.ndarray:
        return np.arange(self.n2) * self.dx2

    @cached_property
    def x2_mid(self) -> np.ndarray:
        return (np.arange(self.n2 - 1) + 0.5) * self.dx2

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def mid_mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2_mid, indexing="ij")

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        # x2 quadrature weights; x1 uses the plain rectangle rule
        w = np.full(self.n2, self.dx2)
        w[0] = w[-1] = 0.5 * self.dx2
        return w

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def integrate(self, values: np.ndarray) -> float:
        """Rectangle-in-x1, trapezoid-in-x2 quadrature of a node array"""
        return float(self.dx1 * np.sum(values @ self.trapezoid_weights))

    def integrate_mid(self, values: np.ndarray) -> float:
        """Midpoint-rule quadrature of an array living on x2 midpoints"""
        return float(self.dx1 * self.dx2 * np.sum(values))
