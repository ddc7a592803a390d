"""
Discrete differential operators on the channel grid

x1 derivatives are applied through their Fourier symbols (spectral or the
three-point stencil's symbol), x2 derivatives use second-order centred
differences with one-sided second-order rows at the walls.
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple

import numpy as np
import scipy.fft

from .errors import ParameterError
from .grid import Grid

logger = logging.getLogger(__name__)


class AdvectionForm(str, Enum):
    SKEW = "skew"
    ADVECTIVE = "advective"


class X1Method(str, Enum):
    FOURIER_SPECTRAL = "fourier_spectral"
    CENTERED2 = "centered2"


@dataclass(frozen=True)
class OperatorConfig:
    advection_form: str = AdvectionForm.SKEW.value
    x1_method: str = X1Method.FOURIER_SPECTRAL.value

    def __post_init__(self):
        try:
            AdvectionForm(self.advection_form)
        except ValueError:
            raise ParameterError("advection_form", f"unknown advection form {self.advection_form!r}") from None
        try:
            X1Method(self.x1_method)
        except ValueError:
            raise ParameterError("x1_method", f"unknown x1 method {self.x1_method!r}") from None


DEFAULT_CONFIG = OperatorConfig()


def fft_workers() -> int:
    """FFT worker count from ATMOCIRC_THREADS (default 1 keeps runs bit-reproducible)"""
    raw = os.getenv("ATMOCIRC_THREADS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ParameterError("ATMOCIRC_THREADS", f"must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise ParameterError("ATMOCIRC_THREADS", f"must be a positive integer, got {raw!r}")
    return workers


@lru_cache(maxsize=None)
def x1_symbols(grid: Grid, method: str = X1Method.FOURIER_SPECTRAL.value) -> Tuple[np.ndarray, np.ndarray]:
    """Fourier symbols (d1, d11) of the first and second x1 derivatives on the rfft modes"""
    k = np.arange(grid.n1 // 2 + 1, dtype=float)
    if X1Method(method) is X1Method.FOURIER_SPECTRAL:
        d1 = 1j * k
        d11 = -k * k
    else:
        d1 = 1j * np.sin(k * grid.dx1) / grid.dx1
        d11 = -4.0 * np.sin(0.5 * k * grid.dx1) ** 2 / grid.dx1**2
    # Nyquist first derivative is zeroed so the operator stays real and antisymmetric
    d1[-1] = 0.0
    d1.flags.writeable = False
    d11.flags.writeable = False
    return d1, d11


def to_modes(values: np.ndarray) -> np.ndarray:
    return scipy.fft.rfft(values, axis=0, workers=fft_workers())


def from_modes(modes: np.ndarray, n1: int) -> np.ndarray:
    return scipy.fft.irfft(modes, n=n1, axis=0, workers=fft_workers())


def _apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    n1 = values.shape[0]
    return from_modes(to_modes(values) * symbol[:, None], n1)


def d1(grid: Grid, f: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """∂f/∂x1; works on node and midpoint arrays alike"""
    return _apply_symbol(f, x1_symbols(grid, config.x1_method)[0])


def d11(grid: Grid, f: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    return _apply_symbol(f, x1_symbols(grid, config.x1_method)[1])


def d2(grid: Grid, f: np.ndarray) -> np.ndarray:
    """∂f/∂x2: centred interior, one-sided second order at the walls"""
    return np.gradient(f, grid.dx2, axis=1, edge_order=2)


def d22(grid: Grid, f: np.ndarray) -> np.ndarray:
    h2 = grid.dx2**2
    out = np.empty_like(f)
    out[:, 1:-1] = (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) / h2
    if grid.n2 >= 4:
        out[:, 0] = (2.0 * f[:, 0] - 5.0 * f[:, 1] + 4.0 * f[:, 2] - f[:, 3]) / h2
        out[:, -1] = (2.0 * f[:, -1] - 5.0 * f[:, -2] + 4.0 * f[:, -3] - f[:, -4]) / h2
    else:
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, -2]
    return out


def gradient(grid: Grid, f: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> Tuple[np.ndarray, np.ndarray]:
    return d1(grid, f, config), d2(grid, f)


def divergence(grid: Grid, u1: np.ndarray, u2: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    return d1(grid, u1, config) + d2(grid, u2)


def laplacian(grid: Grid, f: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Δ_h f; wall rows use a one-sided stencil and are never consumed by the stepper"""
    return d11(grid, f, config) + d22(grid, f)


def advect(
    grid: Grid,
    u1: np.ndarray,
    u2: np.ndarray,
    f: np.ndarray,
    config: OperatorConfig = DEFAULT_CONFIG,
) -> np.ndarray:
    """Transport term (u·∇)f, in skew form ½[(u·∇)f + ∇·(uf)] by default

    Wall rows of the result are zero.
    """
    g1, g2 = gradient(grid, f, config)
    out = u1 * g1 + u2 * g2
    if AdvectionForm(config.advection_form) is AdvectionForm.SKEW:
        out = 0.5 * (out + d1(grid, u1 * f, config) + d2(grid, u2 * f))
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def dirichlet_form(grid: Grid, a: np.ndarray, b: np.ndarray, config: OperatorConfig = DEFAULT_CONFIG) -> float:
    """Discrete ∫∇a·∇b consistent with laplacian

    For fields with zero wall rows this equals -⟨Δ_h a, b⟩ exactly: the x1
    part is taken through the symbol of the second derivative and the x2
    part through first differences between neighbouring nodes.
    """
    x1_part = grid.integrate(a * -d11(grid, b, config))
    da = np.diff(a, axis=1)
    db = np.diff(b, axis=1)
    x2_part = grid.dx1 * np.sum(da * db) / grid.dx2
    return float(x1_part + x2_part)
