"""Deterministic tick-stepped plant shared by the service and batch replay.

One tick applies any pending command, then advances the relaxation kernel a
fixed number of substeps.  Identical command sequences therefore reproduce
identical trajectories bit for bit, which is what makes interactive sessions
replayable through the batch path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .analysis import _tip_direction
from .control import PoseConfig, SensorReading, sense_infrared, tendon_strain
from .dynamics import (ActuationCommand, RelaxParams, Rig, _run_kernel)
from .environment import Environment
from .errors import IntegrationError
from .fdm import EquilibriumState


@dataclass
class TickResult:
    tick: int
    time: float
    tip: tuple
    strains: tuple
    delta_l: tuple
    stiffness_scale: float
    residual: float
    converged: bool
    sensor: SensorReading | None


class PlantSession:
    """Owns one simulation clock; commands apply atomically between ticks."""

    def __init__(self, rig: Rig, env: Environment | None = None,
                 substeps: int = 600, tick_dt: float = 1.0 / 30.0,
                 params: RelaxParams | None = None):
        self.rig = rig
        self.env = env if env is not None else Environment()
        self.substeps = substeps
        self.tick_dt = tick_dt
        self.params = params or RelaxParams(tol=1e-8)
        self.command = ActuationCommand()
        self.coords = rig.rest_coords.copy()
        self.vel = np.zeros_like(self.coords)
        self.tick = 0
        self.applied_log: list[tuple[int, ActuationCommand]] = []
        self._pending: list[ActuationCommand] = []
        self._last_residual = 0.0
        self._last_converged = True
        self._rebuild_arrays()

    # -- assembly ------------------------------------------------------------
    def _rebuild_arrays(self):
        rig = self.rig
        scale = rig.materials.prestress_scale_for(self.command.stiffness)
        self._scale = scale
        (self._src, self._dst, self._tension_only, self._ks,
         self._L0) = rig.spring_arrays(scale)
        self._tendons = rig.tendon_arrays(self.command.delta_l)
        from .dynamics import _preconditioned_minv
        self._minv = _preconditioned_minv(
            rig.model.node_count, self._src, self._dst, self._ks,
            self._tendons, 1.0)
        self._fext = np.zeros((rig.model.node_count, 3))
        self._free = ~rig._fixed

    # -- command & stepping ----------------------------------------------------
    def queue_command(self, command: ActuationCommand):
        command.validate(self.rig.materials.stroke_limit)
        self._pending.append(command)

    def _apply_pending(self):
        if not self._pending:
            return
        for command in self._pending:
            self.command = command
            self.applied_log.append((self.tick, command))
        self._pending.clear()
        self._rebuild_arrays()

    def step(self) -> TickResult:
        """Apply pending command, advance one tick of fixed substeps."""
        self._apply_pending()
        params = replace(self.params, max_steps=self.substeps, dt=1.0)
        status, steps, resid, member_force, _ = _run_kernel(
            self.coords, self.vel, self._src, self._dst, self._tension_only,
            self._ks, self._L0, self._free, self._minv, self._fext,
            self._tendons, params, self.rig.force_scale())
        if status == kernels.STATUS_DIVERGED:
            raise IntegrationError(
                f"plant diverged at tick {self.tick}",
                last_stable_step=self.tick * self.substeps + steps)
        self._last_residual = float(resid)
        self._last_converged = status == kernels.STATUS_CONVERGED
        self.tick += 1
        return self.tick_result()

    def tick_result(self) -> TickResult:
        return TickResult(
            tick=self.tick, time=self.tick * self.tick_dt,
            tip=tuple(self.tip()), strains=self.strains(),
            delta_l=self.command.delta_l, stiffness_scale=self._scale,
            residual=self._last_residual, converged=self._last_converged,
            sensor=self.sensor_reading())

    # -- observations ----------------------------------------------------------
    def tip(self) -> np.ndarray:
        return self.rig.tip(self.coords)

    def strains(self) -> tuple:
        return tendon_strain(self.command.delta_l, self.rig.tendon_rest)

    def sensor_reading(self) -> SensorReading | None:
        if not self.env.obstacles:
            return None
        direction = _tip_direction(self.rig, self.coords)
        pose = PoseConfig(alpha=0.0, beta=0.0, tip=tuple(self.tip()))
        return sense_infrared(self.env, pose, direction,
                              timestamp=self.tick * self.tick_dt)

    def state(self) -> EquilibriumState:
        pairs = self.rig._member_pairs
        n_mb = self.rig.member_count
        lengths = np.linalg.norm(self.coords[pairs[:, 1]]
                                 - self.coords[pairs[:, 0]], axis=1)
        forces = self._ks[:n_mb] * (lengths - self._L0[:n_mb])
        forces = np.where(self.rig._tension_only, np.maximum(forces, 0.0),
                          forces)
        return EquilibriumState(
            nodes=list(self.rig.model.nodes), coords=self.coords.copy(),
            members=list(self.rig.model.members), member_forces=forces,
            prestress_scale=self._scale, residual=self._last_residual,
            residual_rel=self._last_residual / self.rig.force_scale(),
            converged=self._last_converged)

    def member_forces(self) -> np.ndarray:
        return self.state().member_forces


def run_script(rig: Rig, ticks: int, entries, env=None, substeps: int = 600,
               tick_dt: float = 1.0 / 30.0):
    """Replay an actuation script; returns (tick results, final session).

    The session keeps coordinate snapshots at every command tick in
    ``session.snapshots`` for geometry export.
    """
    session = PlantSession(rig, env=env, substeps=substeps, tick_dt=tick_dt)
    session.snapshots = {}
    by_tick: dict[int, list[ActuationCommand]] = {}
    for tick, command in entries:
        by_tick.setdefault(tick, []).append(command)
    results = [session.tick_result()]
    for tick in range(ticks):
        for command in by_tick.get(tick, ()):
            session.queue_command(command)
        results.append(session.step())
        if tick in by_tick:
            session.snapshots[session.tick] = session.coords.copy()
    return results, session
