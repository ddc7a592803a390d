"""
Physical constants, dimensionless groups and the scalings between them
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Dict, Tuple, Union

import numpy as np

from .errors import ParameterError

logger = logging.getLogger(__name__)

ArrayOrFloat = Union[float, np.ndarray]


class HumiditySourceScaling(str, Enum):
    PAPER = "paper"
    SYMMETRIC = "symmetric"


class CoriolisSign(str, Enum):
    PAPER = "paper"
    ANTISYMMETRIC = "antisymmetric"


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional constants (SI units); boundary data named by wall"""

    nu: float
    kappa_T: float
    kappa_q: float
    alpha_T: float
    alpha_q: float
    g: float
    h: float
    Omega: float
    sigma0: float
    sigma1: float
    T_bottom: float
    T_top: float
    q_bottom: float
    q_top: float

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f.name, f"must be a finite number, got {value!r}")
        for name in ("nu", "kappa_T", "kappa_q", "h"):
            if getattr(self, name) <= 0:
                raise ParameterError(name, f"must be positive, got {getattr(self, name)!r}")
        if self.T_bottom == self.T_top:
            raise ParameterError("T_top", "T_bottom and T_top must differ (scaling divides by their difference)")

    @property
    def delta_T(self) -> float:
        return self.T_bottom - self.T_top

    @property
    def delta_q(self) -> float:
        return self.q_bottom - self.q_top


@dataclass(frozen=True)
class DimensionlessParams:
    """Groups Pr, Le, R, R̃, σ0', σ1', ω of the nondimensional system"""

    Pr: float
    Le: float
    R: float
    R_tilde: float
    sigma0p: float
    sigma1p: float
    omega: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f.name, f"must be a finite number, got {value!r}")
        if self.Pr <= 0:
            raise ParameterError("Pr", f"must be positive, got {self.Pr!r}")
        if self.Le <= 0:
            raise ParameterError("Le", f"must be positive, got {self.Le!r}")

    def sigma_matrix(self, coriolis_sign: str = "paper") -> np.ndarray:
        """[[σ0', ω], [±ω, σ1']]; symmetric for 'paper', rotation-like for 'antisymmetric'"""
        lower = self.omega if CoriolisSign(coriolis_sign) is CoriolisSign.PAPER else -self.omega
        return np.array([[self.sigma0p, self.omega], [lower, self.sigma1p]])

    def sigma_norm(self, coriolis_sign: str = "paper") -> float:
        return float(np.linalg.norm(self.sigma_matrix(coriolis_sign), 2))

    def diffusivities(self) -> Dict[str, float]:
        return {"u1": self.Pr, "u2": self.Pr, "T": 1.0, "q": self.Le}

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _require_nonzero(value: float, name: str) -> None:
    if value == 0 or not math.isfinite(value):
        raise ParameterError(name, f"must be finite and nonzero, got {value!r}")


def nondimensionalize(p: PhysicalParams) -> DimensionlessParams:
    """Dimensionless groups of the channel system for a set of physical constants"""
    p.validate()
    denom = p.kappa_T * p.nu
    _require_nonzero(denom, "kappa_T")
    h2 = p.h * p.h
    h3 = h2 * p.h
    d = DimensionlessParams(
        Pr=p.nu / p.kappa_T,
        Le=p.kappa_q / p.kappa_T,
        R=p.g * p.alpha_T * p.delta_T * h3 / denom,
        R_tilde=p.g * p.alpha_q * p.delta_q * h3 / denom,
        sigma0p=p.sigma0 * h2 / p.nu,
        sigma1p=p.sigma1 * h2 / p.nu,
        omega=2.0 * p.Omega * h2 / p.nu,
    )
    logger.debug(f"Nondimensionalized: {d}")
    return d


def scale_time(p: PhysicalParams, t_dimensional: ArrayOrFloat) -> ArrayOrFloat:
    """Seconds to dimensionless time, t' = t·κ_T/h²"""
    p.validate()
    return t_dimensional * p.kappa_T / (p.h * p.h)


def scale_length(p: PhysicalParams, x_dimensional: ArrayOrFloat) -> ArrayOrFloat:
    p.validate()
    return x_dimensional / p.h


def scale_velocity(p: PhysicalParams, u_dimensional: ArrayOrFloat) -> ArrayOrFloat:
    p.validate()
    return u_dimensional * p.h / p.kappa_T


def scale_forcing(
    p: PhysicalParams,
    Q_dim: ArrayOrFloat,
    G_dim: ArrayOrFloat,
    humidity_source_scaling: str = "paper",
) -> Tuple[ArrayOrFloat, ArrayOrFloat]:
    """Dimensional heat/humidity sources to nondimensional ones

    With 'paper' both sources use h²/((T_bottom - T_top)·κ_T); with
    'symmetric' the humidity source uses the humidity difference instead.
    """
    p.validate()
    factor_Q = p.h * p.h / (p.delta_T * p.kappa_T)
    if HumiditySourceScaling(humidity_source_scaling) is HumiditySourceScaling.SYMMETRIC:
        if p.delta_q == 0:
            raise ParameterError("q_top", "q_bottom and q_top must differ for symmetric humidity scaling")
        factor_G = p.h * p.h / (p.delta_q * p.kappa_T)
    else:
        factor_G = factor_Q
    return Q_dim * factor_Q, G_dim * factor_G


def to_dimensional(p: PhysicalParams, state) -> Dict[str, np.ndarray]:
    """Dimensional fields for a nondimensional state

    Temperature and humidity get the linear conduction profiles added back;
    pressure is returned as kinematic pressure p/ρ0 (ρ0 is not an input).
    """
    p.validate()
    grid = state.grid
    X1, X2 = grid.mesh()
    u_scale = p.kappa_T / p.h
    return {
        "x1": X1 * p.h,
        "x2": X2 * p.h,
        "t": state.time * p.h * p.h / p.kappa_T,
        "u1": state.u1.values * u_scale,
        "u2": state.u2.values * u_scale,
        "T": p.T_bottom - p.delta_T * X2 + p.delta_T * state.T.values,
        "q": p.q_bottom - p.delta_q * X2 + p.delta_q * state.q.values,
        "p": state.p.values * p.nu * p.kappa_T / (p.h * p.h),
    }
