"""Discrete-time stochastic particle model approximating the kinetic dynamics.

Each particle carries a position X and a headway S. Per step, every particle
advects with speed c(X)V(S); with probability dt it interacts with a partner
drawn near X + eta, and (in the slow-relaxation mode) with probability
eps*dt its headway relaxes towards H(rho_local).

All randomness flows through one generator per step derived from
(master seed, step index), and updates are vectorized against the pre-step
snapshot, so trajectories are reproducible regardless of worker count.
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
    capacity_eval,
    headway_H,
    speed_V,
)
from .micro import _snap_times


@dataclass(frozen=True)
class RngStream:
    """Deterministic substream: identical (seed, stream) -> identical draws."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.stream])


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted (position, headway) samples of the kinetic distribution."""

    x: np.ndarray
    s: np.ndarray
    weight: float  # mass per particle

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        s = np.asarray(self.s, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)
        if x.shape != s.shape or x.ndim != 1:
            raise ConfigError("X and S must be 1-D arrays of equal length")
        if self.weight <= 0:
            raise ConfigError("particle weight must be positive")
        if np.any(s < 0):
            raise NumericalError("negative headway in ensemble")

    @property
    def n(self) -> int:
        return len(self.x)


def particle_init(rho0, h0, n_particles: int, grid: Grid1D) -> ParticleEnsemble:
    """Stratified placement: equal mass increments of rho0 between particles."""
    centers_fine = grid.x_min + (np.arange(8 * grid.n_cells) + 0.5) * grid.dx / 8
    dens = np.asarray(rho0(centers_fine), dtype=float)
    cell_mass = dens * grid.dx / 8
    total = cell_mass.sum()
    if total <= 0:
        raise ConfigError("rho0 must have positive total mass")
    cum = np.concatenate([[0.0], np.cumsum(cell_mass)])
    targets = (np.arange(n_particles) + 0.5) * (total / n_particles)
    idx = np.searchsorted(cum, targets, side="right") - 1
    frac = (targets - cum[idx]) / np.maximum(cell_mass[idx], 1e-300)
    x = grid.x_min + (idx + frac) * grid.dx / 8
    s = np.asarray(h0(x), dtype=float)
    return ParticleEnsemble(x=x, s=s, weight=total / n_particles)


def bin_to_fields(ens: ParticleEnsemble, grid: Grid1D) -> MacroField:
    """Histogram the ensemble: rho = mass per cell / dx, h = mean headway."""
    cells = grid.cell_index(ens.x)
    counts = np.bincount(cells, minlength=grid.n_cells)
    rho = ens.weight * counts / grid.dx
    s_sum = np.bincount(cells, weights=ens.s, minlength=grid.n_cells)
    h = np.divide(s_sum, counts, out=np.zeros(grid.n_cells), where=counts > 0)
    return MacroField(rho=rho, h=h, grid=grid)


def _select_partners(x_wrapped: np.ndarray, targets: np.ndarray,
                     half_window: float, length: float, x_min: float,
                     u: np.ndarray) -> np.ndarray:
    """Partner indices for the given target positions.

    A partner is drawn uniformly among particles within half_window of the
    target (periodic); if that window is empty, the nearest particle ahead of
    the target is used.
    """
    order = np.argsort(x_wrapped, kind="stable")
    xs = x_wrapped[order]
    n = len(xs)
    # shift targets so the search window never crosses x_min
    t = x_min + np.mod(targets - x_min, length)
    t = np.where(t - half_window < x_min, t + length, t)
    xs2 = np.concatenate([xs, xs + length])
    lo = np.searchsorted(xs2, t - half_window, side="left")
    hi = np.searchsorted(xs2, t + half_window, side="right")
    count = hi - lo
    pick = lo + np.floor(u * np.maximum(count, 1)).astype(np.int64)
    # empty window: fall back to the nearest particle ahead
    ahead = np.searchsorted(xs2, t, side="right")
    pick = np.where(count > 0, pick, ahead)
    return order[pick % n]


def particle_step(ens: ParticleEnsemble, params: ModelParams,
                  capacity: CapacitySpec, grid: Grid1D,
                  rng: np.random.Generator, mode: str = "slow-relaxation",
                  y=None) -> ParticleEnsemble:
    if mode not in ("slow-relaxation", "no-relaxation"):
        raise ConfigError(f"unknown particle mode {mode!r}")
    dt = params.dt
    if dt > min(1.0, 1.0 / params.epsilon) + 1e-12:
        raise ConfigError("dt must satisfy dt <= min(1, 1/epsilon)")

    x, s = ens.x, ens.s
    xw = grid.wrap(x)
    c_self = capacity_eval(capacity, xw, y)
    v_self = c_self * speed_V(s)

    # fixed draw layout per step keeps the stream independent of branch outcomes
    theta = rng.random(ens.n) < dt
    xi_u = rng.random(ens.n)
    partner_u = rng.random(ens.n)

    ds = np.zeros(ens.n)
    if theta.any():
        idx = np.flatnonzero(theta)
        partners = _select_partners(xw, xw[idx] + params.eta,
                                    grid.dx / 2, grid.length, grid.x_min,
                                    partner_u[idx])
        v_star = c_self[partners] * speed_V(s[partners])
        ds[idx] = params.gamma * (v_star - v_self[idx])

    if mode == "slow-relaxation" and params.a > 0:
        xi = xi_u < params.epsilon * dt
        if xi.any():
            field = bin_to_fields(ens, grid)
            rho_local = field.rho[grid.cell_index(x)]
            ds = ds + np.where(xi, params.a * (headway_H(rho_local) - s), 0.0)

    new_s = s + ds
    if np.any(new_s < 0):
        raise NumericalError(
            "negative headway after particle update; check gamma <= 1, a <= 1")
    new_x = grid.wrap(x + v_self * dt)
    return replace(ens, x=new_x, s=new_s)


def run_particle(ens: ParticleEnsemble, capacity: CapacitySpec,
                 params: ModelParams, grid: Grid1D, seed: int,
                 mode: str = "slow-relaxation", y=None, out_times=None):
    """Step the ensemble to params.T, binning at the requested output times."""
    out = _snap_times(out_times, params)
    fields = {}
    if 0 in out:
        fields[out[0]] = bin_to_fields(ens, grid)
    for j in range(1, params.n_steps() + 1):
        rng = RngStream(seed, j).generator()
        ens = particle_step(ens, params, capacity, grid, rng, mode, y)
        if j in out:
            fields[out[j]] = bin_to_fields(ens, grid)
    return fields
