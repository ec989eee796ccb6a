"""Particle swarm search for the RIS position inside its deployment box.

The fitness callable must accept a (P, 3) array of candidate positions and
return a (P,) array of values; the swarm maximizes it. Fitness is expected
to be deterministic (the frozen-draw contract of the channel module), so a
fixed generator makes the whole trajectory bitwise reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .scenario import Box, PsoParams, ScenarioValidationError

__all__ = ["Particle", "SwarmState", "init_swarm", "step_swarm", "pso_optimize"]


@dataclass(frozen=True)
class Particle:
    """Read-only view of one swarm member."""

    position: np.ndarray
    velocity: np.ndarray
    p_best_pos: np.ndarray
    p_best_val: float


@dataclass(frozen=True)
class SwarmState:
    """Vectorized swarm: row i of each array belongs to particle i."""

    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_values: np.ndarray
    g_best_pos: np.ndarray
    g_best_val: float
    iteration: int
    history: tuple

    @property
    def particles(self):
        return [
            Particle(self.positions[i], self.velocities[i], self.best_positions[i], self.best_values[i])
            for i in range(len(self.best_values))
        ]


def _v_max(box: Box, params: PsoParams):
    if params.v_max is None:
        return 0.2 * box.edges
    return np.broadcast_to(np.asarray(params.v_max, dtype=float), (3,)).copy()


def init_swarm(fitness, box: Box, params: PsoParams, rng, seed_points=()) -> SwarmState:
    """Start all particles at the clamped init point, seeds replacing the head.

    Identical positions with zero velocity would be degenerate, so initial
    velocities are uniform in the clamp range.
    """
    n = params.n_particles
    positions = np.tile(box.clamp(np.asarray(params.init_position, dtype=float)), (n, 1))
    for i, pt in enumerate(seed_points):
        if i >= n:
            break
        positions[i] = box.clamp(np.asarray(pt, dtype=float))
    vmax = _v_max(box, params)
    velocities = rng.uniform(-vmax, vmax, size=(n, 3))
    values = np.asarray(fitness(positions), dtype=float)
    g = int(np.argmax(values))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        best_positions=positions.copy(),
        best_values=values.copy(),
        g_best_pos=positions[g].copy(),
        g_best_val=float(values[g]),
        iteration=0,
        history=(float(values[g]),),
    )


def _inertia(params: PsoParams, it):
    span = max(params.max_iters - 1, 1)
    frac = min(it, span) / span
    return params.w_max - (params.w_max - params.w_min) * frac


def step_swarm(state: SwarmState, fitness, box: Box, params: PsoParams, it, rng) -> SwarmState:
    """One synchronous swarm update; returns the successor state.

    r1 and r2 are drawn per particle and per dimension; positions are clamped
    into the box with the clamped velocity component zeroed to stop boundary
    oscillation.
    """
    n = params.n_particles
    vmax = _v_max(box, params)
    r1 = rng.uniform(size=(n, 3))
    r2 = rng.uniform(size=(n, 3))
    w = _inertia(params, it)
    vel = (
        w * state.velocities
        + params.c1 * r1 * (state.best_positions - state.positions)
        + params.c2 * r2 * (state.g_best_pos[None, :] - state.positions)
    )
    vel = np.clip(vel, -vmax, vmax)
    pos = state.positions + vel
    clamped = box.clamp(pos)
    vel = np.where(clamped != pos, 0.0, vel)
    pos = clamped
    values = np.asarray(fitness(pos), dtype=float)
    improved = values > state.best_values
    best_positions = np.where(improved[:, None], pos, state.best_positions)
    best_values = np.where(improved, values, state.best_values)
    g = int(np.argmax(best_values))
    if best_values[g] > state.g_best_val:
        g_best_pos, g_best_val = best_positions[g].copy(), float(best_values[g])
    else:
        g_best_pos, g_best_val = state.g_best_pos, state.g_best_val
    return SwarmState(
        positions=pos,
        velocities=vel,
        best_positions=best_positions,
        best_values=best_values,
        g_best_pos=g_best_pos,
        g_best_val=g_best_val,
        iteration=it + 1,
        history=state.history + (g_best_val,),
    )


def pso_optimize(fitness, box: Box, params: PsoParams, rng, seed_points=(), trace_path=None):
    """Maximize a deterministic fitness over the box.

    Returns (best position, best value, per-iteration g_best history). Stops
    at max_iters or once the g_best improvement of an iteration falls below
    params.tol (0 disables the early stop).
    """
    if not np.all(box.hi > box.lo):
        raise ScenarioValidationError("placement box is degenerate")
    state = init_swarm(fitness, box, params, rng, seed_points=seed_points)
    rows = [(0, state.g_best_val, *state.g_best_pos)]
    for it in range(params.max_iters):
        prev = state.g_best_val
        state = step_swarm(state, fitness, box, params, it, rng)
        rows.append((state.iteration, state.g_best_val, *state.g_best_pos))
        if state.g_best_val - prev < params.tol:
            break
    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "g_best_val", "x", "y", "z"])
            writer.writerows(rows)
    return state.g_best_pos.copy(), state.g_best_val, list(state.history)
