"""Shared domain types, model closures and road-capacity functions.

Everything here is an immutable value type; instances can be shared freely
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario/parameter configuration."""


class NumericalError(RuntimeError):
    """A solver produced an invalid state (NaN, negative density, ...)."""


class OrderingViolationError(NumericalError):
    """Vehicle ordering was lost during a microscopic step."""


class CFLViolationError(ConfigError):
    """Time step too large for the spatial grid."""

    def __init__(self, ratio: float):
        self.ratio = ratio
        super().__init__(f"CFL condition violated: ratio {ratio:.6g} > 1")


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Equispaced 1-D grid of cell centers on [x_min, x_max]."""

    x_min: float
    x_max: float
    dx: float
    periodic: bool = True

    def __post_init__(self):
        if self.dx <= 0:
            raise ConfigError("dx must be positive")
        if self.x_max <= self.x_min:
            raise ConfigError("x_max must exceed x_min")
        n = (self.x_max - self.x_min) / self.dx
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(
                f"domain length {self.x_max - self.x_min} is not an integer "
                f"multiple of dx={self.dx}"
            )

    @property
    def n_cells(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    def wrap(self, x):
        """Map positions into [x_min, x_max)."""
        return self.x_min + np.mod(np.asarray(x, dtype=float) - self.x_min,
                                   self.length)

    def cell_index(self, x) -> np.ndarray:
        """Cell containing each (wrapped) position."""
        xw = self.wrap(x) if self.periodic else np.asarray(x, dtype=float)
        idx = np.floor((xw - self.x_min) / self.dx).astype(np.int64)
        return np.clip(idx, 0, self.n_cells - 1)


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Interaction / relaxation parameters shared by all model scales.

    gamma   -- interaction timescale of the headway update
    eta     -- interaction distance (non-locality of the kinetic operator)
    epsilon -- ratio of relaxation to interaction rates
    a       -- relaxation strength towards the recommended headway, in [0, 1]
    dt, T   -- time step and horizon
    L       -- reference vehicle length
    N       -- vehicle (or particle) count
    """

    gamma: float = 0.5
    eta: float = 1e-2
    epsilon: float = 1e-3
    a: float = 0.0
    dt: float = 1e-3
    T: float = 10.0
    L: float = 1e-4
    N: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            # gamma <= C with C = 1 for the default speed closure keeps the
            # post-interaction headway non-negative.
            raise ConfigError("gamma must lie in [0, 1]")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if not 0.0 <= self.a <= 1.0:
            raise ConfigError("a must lie in [0, 1]")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if self.N < 1:
            raise ConfigError("N must be at least 1")

    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


# ---------------------------------------------------------------------------
# Closures
# ---------------------------------------------------------------------------

def speed_V(h):
    """Speed as a function of headway: V(h) = h / (h + 1)."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("headway must be non-negative")
    return h / (h + 1.0)


def speed_V_prime(h):
    h = np.asarray(h, dtype=float)
    return 1.0 / (1.0 + h) ** 2


def speed_V_second(h):
    h = np.asarray(h, dtype=float)
    return -2.0 / (1.0 + h) ** 3


def headway_H(rho):
    """Recommended headway as a function of density: H(rho) = 1 / (1 + rho)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    return 1.0 / (1.0 + rho)


def micro_speed_Vtilde(u):
    """Microscopic speed from the occupancy ratio u = L / gap."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("occupancy ratio must be non-negative")
    return 1.0 - u


def micro_speed_equilibrium(u):
    """Microscopic speed V(H(u)) from the occupancy ratio u = L / gap.

    Composes the macroscopic closures, so follow-the-leader runs using this
    law share their wave speeds with the macroscopic solvers; the linear law
    micro_speed_Vtilde produces roughly twice faster free-flow waves.
    """
    return speed_V(headway_H(u))


def pressure(rho, params: ModelParams):
    """Pressure closure p(rho) = (gamma/2) * eta * rho."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    return 0.5 * params.gamma * params.eta * rho


# ---------------------------------------------------------------------------
# Road capacity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantCapacity:
    c0: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.c0 <= 1.0:
            raise ConfigError("capacity value must lie in [0, 1]")


@dataclass(frozen=True)
class PiecewiseRampCapacity:
    """Capacity drop to c_low on [x_left, x_right] with linear delta-ramps.

    Continuous by construction: the value interpolates linearly between 1 and
    c_low on [x_left - delta, x_left + delta] and back on the right edge.
    """

    c_low: float
    x_left: float
    x_right: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.c_low <= 1.0:
            raise ConfigError("c_low must lie in [0, 1]")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.x_right - self.x_left <= 2 * self.delta:
            raise ConfigError("inner interval too small for the delta-ramps")


@dataclass(frozen=True)
class AccidentCapacity:
    """c(x; Y) = 1 - drop on [-Y, Y], 1 elsewhere; Y supplied at evaluation."""

    drop: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.drop <= 1.0:
            raise ConfigError("drop must lie in [0, 1]")


CapacitySpec = Union[ConstantCapacity, PiecewiseRampCapacity, AccidentCapacity]


def capacity_eval(spec: CapacitySpec, x, y=None):
    """Evaluate the capacity at (already wrapped) positions x.

    The accident variant needs the half-width y; broadcasting over x and y is
    supported.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(spec, ConstantCapacity):
        return np.full_like(x, spec.c0)
    if isinstance(spec, PiecewiseRampCapacity):
        xp = [spec.x_left - spec.delta, spec.x_left + spec.delta,
              spec.x_right - spec.delta, spec.x_right + spec.delta]
        fp = [1.0, spec.c_low, spec.c_low, 1.0]
        return np.interp(x, xp, fp)
    if isinstance(spec, AccidentCapacity):
        if y is None:
            raise ConfigError("accident capacity requires the half-width y")
        y = np.asarray(y, dtype=float)
        return 1.0 - spec.drop * (np.abs(x) <= y)
    raise ConfigError(f"unknown capacity spec {spec!r}")


def capacity_max(spec: CapacitySpec) -> float:
    """Supremum of the capacity, used by the CFL guard."""
    if isinstance(spec, ConstantCapacity):
        return spec.c0
    return 1.0


# ---------------------------------------------------------------------------
# Macroscopic field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MacroField:
    """Density and mean headway sampled at the cell centers of a grid."""

    rho: np.ndarray
    h: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "h", h)
        n = self.grid.n_cells
        if rho.shape != (n,) or h.shape != (n,):
            raise ConfigError("field arrays must match the grid cell count")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(h))):
            raise NumericalError("non-finite values in macroscopic field")
        # Tolerate rounding-level negatives, reject anything real.
        if np.any(rho < -1e-12) or np.any(h < -1e-12):
            raise NumericalError("negative values in macroscopic field")
        object.__setattr__(self, "rho", np.maximum(rho, 0.0))
        object.__setattr__(self, "h", np.maximum(h, 0.0))
