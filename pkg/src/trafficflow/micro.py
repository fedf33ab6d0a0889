"""Deterministic follow-the-leader ODE model with explicit Euler stepping.

Positions are kept unwrapped (strictly increasing) internally; they are
wrapped into the periodic domain only for capacity evaluation and output.
The leader of the last vehicle is the first one shifted by the road length.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CapacitySpec,
    ConfigError,
    Grid1D,
    MacroField,
    ModelParams,
    NumericalError,
    OrderingViolationError,
    capacity_eval,
    capacity_max,
    headway_H,
    micro_speed_Vtilde,
)


@dataclass(frozen=True)
class MicroState:
    """Ordered vehicle positions on a periodic road."""

    positions: np.ndarray  # strictly increasing, unwrapped
    L: float
    x_min: float
    road_length: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        if self.L <= 0 or self.road_length <= 0:
            raise ConfigError("vehicle length and road length must be positive")
        gaps = self.gaps()
        if np.any(gaps <= 0):
            raise OrderingViolationError(
                f"non-positive gap at vehicle {int(np.argmin(gaps))}")
        total = gaps.sum()
        if abs(total - self.road_length) > 1e-9 * self.road_length:
            raise ConfigError(
                f"gaps sum to {total}, expected road length {self.road_length}")

    @property
    def N(self) -> int:
        return len(self.positions)

    def gaps(self) -> np.ndarray:
        return periodic_gaps(self.positions, self.road_length)

    def wrapped(self) -> np.ndarray:
        return self.x_min + np.mod(self.positions - self.x_min,
                                   self.road_length)


def periodic_gaps(positions: np.ndarray, road_length: float) -> np.ndarray:
    """Headways s_i = x_{i+1} - x_i along the last axis, with periodic wrap."""
    nxt = np.roll(positions, -1, axis=-1)
    nxt[..., -1] += road_length
    return nxt - positions


def micro_init_from_density(rho0, N: int, L: float, grid: Grid1D) -> MicroState:
    """Place N vehicles so the local densities reproduce the profile rho0.

    Uses cumulative-mass inversion: consecutive vehicles are separated by
    equal increments of the integrated density, so L / gap tracks rho0 away
    from profile jumps.
    """
    if N * L > grid.length:
        raise ConfigError(
            f"cannot place N*L = {N * L} of vehicle on a road of length "
            f"{grid.length}")

    # breakpoints of the piecewise-constant profile inside the domain
    thresholds = getattr(rho0, "thresholds", None)
    if thresholds is None:
        raise ConfigError("rho0 must be a piecewise profile")
    edges = [grid.x_min]
    edges += [t for t in thresholds if grid.x_min < t < grid.x_max]
    edges.append(grid.x_max)
    edges = np.asarray(edges, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dens = np.asarray(rho0(mids), dtype=float)
    if np.any(dens < 0):
        raise ConfigError("rho0 must be non-negative")
    seg_mass = dens * np.diff(edges)
    total = seg_mass.sum()
    if total <= 0:
        raise ConfigError("rho0 must have positive total mass")
    cum = np.concatenate([[0.0], np.cumsum(seg_mass)])

    targets = np.arange(N) * (total / N)
    seg = np.minimum(np.searchsorted(cum, targets, side="right") - 1,
                     len(seg_mass) - 1)
    with np.errstate(divide="ignore"):
        offset = np.where(dens[seg] > 0,
                          (targets - cum[seg]) / np.where(dens[seg] > 0,
                                                          dens[seg], 1.0),
                          0.0)
    positions = edges[seg] + offset
    return MicroState(positions=positions, L=L, x_min=grid.x_min,
                      road_length=grid.length)


def advance_positions(positions: np.ndarray, L: float, x_min: float,
                      road_length: float, capacity: CapacitySpec, dt: float,
                      y=None, speed_law=micro_speed_Vtilde) -> np.ndarray:
    """One explicit Euler step on an array of positions (last axis = vehicles).

    Speeds are evaluated with the pre-step positions; speed_law maps the
    occupancy ratio L / gap to a speed and is floored at zero so vehicles
    never reverse.
    """
    gaps = periodic_gaps(positions, road_length)
    if np.any(gaps <= 0):
        raise OrderingViolationError(
            f"non-positive gap at index {int(np.argmin(gaps))}")
    wrapped = x_min + np.mod(positions - x_min, road_length)
    c = capacity_eval(capacity, wrapped, y)
    speed = np.maximum(speed_law(L / gaps), 0.0)
    new = positions + dt * c * speed
    new_gaps = periodic_gaps(new, road_length)
    if np.any(new_gaps <= 0):
        raise OrderingViolationError(
            f"vehicle ordering lost at index {int(np.argmin(new_gaps))}")
    return new


def micro_step(state: MicroState, capacity: CapacitySpec, dt: float,
               y=None, speed_law=micro_speed_Vtilde) -> MicroState:
    if dt > 1.0 / capacity_max(capacity) + 1e-12:
        raise ConfigError(
            f"dt = {dt} exceeds 1 / (||c|| ||Vtilde||) for the Euler step")
    new = advance_positions(state.positions, state.L, state.x_min,
                            state.road_length, capacity, dt, y,
                            speed_law=speed_law)
    return replace(state, positions=new)


def local_density(state: MicroState) -> np.ndarray:
    """Per-vehicle densities rho_i = L / (x_{i+1} - x_i)."""
    return state.L / state.gaps()


def sample_on_grid(state: MicroState, grid: Grid1D) -> np.ndarray:
    """Evaluate the piecewise-constant local density at the cell centers."""
    return sample_density(state.positions, state.L, grid)


def sample_density(positions: np.ndarray, L: float, grid: Grid1D) -> np.ndarray:
    """Piecewise-constant density of a 1-D position array on grid centers."""
    wrapped = grid.wrap(positions)
    order = np.argsort(wrapped, kind="stable")
    xs = wrapped[order]
    gaps = np.empty_like(xs)
    gaps[:-1] = np.diff(xs)
    gaps[-1] = xs[0] + grid.length - xs[-1]
    if np.any(gaps <= 0):
        raise NumericalError("coincident vehicle positions in density sampling")
    dens = L / gaps
    idx = np.searchsorted(xs, grid.centers, side="right") - 1
    idx[idx < 0] = len(xs) - 1  # centers before the first vehicle wrap around
    return dens[idx]


def micro_headway_field(state: MicroState, grid: Grid1D) -> np.ndarray:
    """Headway field computed artificially as H(rho) from the local density."""
    return headway_H(sample_on_grid(state, grid))


def micro_fields(state: MicroState, grid: Grid1D) -> MacroField:
    rho = sample_on_grid(state, grid)
    return MacroField(rho=rho, h=headway_H(rho), grid=grid)


def run_micro(state: MicroState, capacity: CapacitySpec, params: ModelParams,
              grid: Grid1D, y=None, out_times=None,
              speed_law=micro_speed_Vtilde):
    """Integrate to params.T; returns {time: MacroField} at requested times."""
    out = _snap_times(out_times, params)
    n_steps = params.n_steps()
    fields = {}
    if 0 in out:
        fields[out[0]] = micro_fields(state, grid)
    for j in range(1, n_steps + 1):
        state = micro_step(state, capacity, params.dt, y, speed_law=speed_law)
        if j in out:
            fields[out[j]] = micro_fields(state, grid)
    return fields


def _snap_times(out_times, params: ModelParams) -> dict:
    """Map requested output times to step indices (nearest step)."""
    if out_times is None:
        out_times = (0.0, params.T / 2, params.T)
    n_steps = params.n_steps()
    snapped = {}
    for t in out_times:
        j = int(round(t / params.dt))
        if not 0 <= j <= n_steps:
            raise ConfigError(f"output time {t} outside [0, T]")
        snapped[j] = t
    return snapped
