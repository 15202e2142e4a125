"""Workspace metrics, strain-by-configuration tables, and exploration maps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .control import (ControlGeometry, PoseConfig, SensorReading,
                      ik_constant_curvature, sense_infrared, tendon_strain)
from .dynamics import ActuationCommand, RelaxParams, Rig, settle
from .environment import Environment
from .errors import LogIntegrityError, ParameterError, SweepError


@dataclass
class WorkspaceMetrics:
    """Range-of-motion summary of one stiffness level.

    accessible_distance: end-to-end extent of the reachable tip set (largest
    separation between two converged tip positions); working_radius: largest
    radial tip offset from the rest axis; reach_angle: largest tip deviation
    angle from the rest spine axis; axial_excursion: tip travel range along
    the axis, reported for reference.
    """

    accessible_distance: float
    working_radius: float
    reach_angle: float
    stiffness_level: str | float
    samples: int
    converged: int
    valid: bool
    axial_excursion: float = 0.0

    @property
    def nonconverged(self) -> int:
        return self.samples - self.converged


def default_actuation_grid(stroke_limit: float, points_per_axis: int = 5,
                           uniform_fraction: float = 1.0 / 3.0):
    """Lattice of tendon commands spanning the drive envelope.

    Axes are the two bending components (reaching the stroke limit) plus a
    mild uniform contraction/extension offset; per-tendon values are clipped
    to the stroke box.  Deep simultaneous pulls of all three tendons sit
    outside the tendon-drive envelope (they crush the stack instead of moving
    the tip) and are deliberately not part of the default grid.
    """
    phis = [2.0 * math.pi * k / 3 for k in range(3)]
    bend = np.linspace(-stroke_limit, stroke_limit, points_per_axis)
    uniform = np.linspace(-uniform_fraction * stroke_limit,
                          uniform_fraction * stroke_limit, points_per_axis)
    grid = []
    for bx, by, u in itertools.product(bend, bend, uniform):
        delta = [u - (bx * math.cos(phi) + by * math.sin(phi))
                 for phi in phis]
        grid.append(tuple(float(np.clip(d, -stroke_limit, stroke_limit))
                          for d in delta))
    return grid


_SWEEP_PARAMS = RelaxParams(tol=3e-7, max_steps=400_000)


def _tip_cylindrical(rig: Rig, coords) -> tuple[float, float, float]:
    axis = rig.axis_unit()
    rel = rig.tip(coords) - rig.platform_center()
    axial = float(rel @ axis)
    radial = float(np.linalg.norm(rel - axial * axis))
    angle = math.atan2(radial, axial)
    return axial, radial, angle


def sweep_workspace(rig: Rig, stiffness_level="high", actuation_grid=None,
                    params: RelaxParams | None = None,
                    min_converged_fraction: float = 0.9) -> WorkspaceMetrics:
    """Relax the plant over an actuation grid and report D, R, theta_max.

    Non-converged samples are excluded from the metrics but counted; the
    sweep is flagged invalid below ``min_converged_fraction``.
    """
    grid = (actuation_grid if actuation_grid is not None
            else default_actuation_grid(rig.materials.stroke_limit))
    if not grid:
        raise ParameterError("actuation grid is empty")
    params = params or _SWEEP_PARAMS
    tips, axials, radials, angles = [], [], [], []
    converged = 0
    failures = []
    for delta in grid:
        command = ActuationCommand(delta_l=tuple(delta),
                                   stiffness=stiffness_level)
        state = settle(rig, command, params=params)
        if not state.converged:
            failures.append(tuple(delta))
            continue
        converged += 1
        tips.append(rig.tip(state.coords))
        axial, radial, angle = _tip_cylindrical(rig, state.coords)
        axials.append(axial)
        radials.append(radial)
        angles.append(angle)
    if converged == 0:
        raise SweepError("no workspace sample converged",
                         diagnostics={"failed_commands": failures})
    tip_arr = np.asarray(tips)
    diffs = tip_arr[:, None, :] - tip_arr[None, :, :]
    diameter = float(np.sqrt((diffs ** 2).sum(axis=2)).max())
    return WorkspaceMetrics(
        accessible_distance=diameter,
        working_radius=float(max(radials)),
        reach_angle=float(max(angles)),
        stiffness_level=stiffness_level,
        samples=len(grid),
        converged=converged,
        valid=converged >= min_converged_fraction * len(grid),
        axial_excursion=float(max(axials) - min(axials)),
    )


@dataclass
class ConfigurationSample:
    """One strain-map row: commanded pose, tendon strains, achieved tip."""

    alpha: float
    beta: float
    strains: tuple[float, float, float]
    tip: tuple[float, float, float]
    converged: bool
    delta_l: tuple[float, float, float]


def default_pose_grid(bend_limit: float, alpha_count: int = 13,
                      beta_count: int = 7):
    alphas = np.linspace(0.0, 2.0 * math.pi, alpha_count, endpoint=False)
    betas = np.linspace(0.0, bend_limit, beta_count)
    return [(float(a), float(b)) for a in alphas for b in betas]


def strain_map(rig: Rig, pose_grid=None, stiffness_level="high",
               geometry: ControlGeometry | None = None,
               params: RelaxParams | None = None) -> list[ConfigurationSample]:
    """Drive the plant through an (alpha, beta) grid and record strains.

    Strains are the commanded length changes over the tendon rest lengths,
    exactly tendon_strain(ik(pose)); non-converged samples keep their row but
    are flagged.
    """
    geometry = geometry or ControlGeometry.from_rig(rig)
    if pose_grid is None:
        max_beta = min(geometry.bend_limit,
                       0.9 * rig.materials.stroke_limit / geometry.pitch_radius)
        pose_grid = default_pose_grid(max_beta)
    params = params or _SWEEP_PARAMS
    samples = []
    for alpha, beta in sorted(pose_grid):
        command = ik_constant_curvature((alpha, beta), geometry,
                                        stiffness=stiffness_level)
        state = settle(rig, command, params=params)
        strains = tendon_strain(command.delta_l, rig.tendon_rest)
        samples.append(ConfigurationSample(
            alpha=alpha, beta=beta, strains=strains,
            tip=tuple(rig.tip(state.coords)), converged=state.converged,
            delta_l=command.delta_l))
    return samples


@dataclass(frozen=True)
class ExplorationEntry:
    """One time-series record of a spatial exploration run."""

    timestamp: float
    alpha: float
    beta: float
    delta_l: tuple[float, float, float]
    stiffness: str | float
    sensor: SensorReading | None
    tip: tuple[float, float, float]
    distance_to_trajectory: float
    converged: bool


@dataclass
class ExplorationLog:
    entries: list[ExplorationEntry] = field(default_factory=list)

    def append(self, entry: ExplorationEntry):
        if self.entries and entry.timestamp <= self.entries[-1].timestamp:
            raise LogIntegrityError(
                f"timestamps must increase strictly: "
                f"{entry.timestamp} after {self.entries[-1].timestamp}")
        self.entries.append(entry)

    def validate(self):
        for prev, cur in zip(self.entries, self.entries[1:]):
            if cur.timestamp <= prev.timestamp:
                raise LogIntegrityError(
                    f"timestamps must increase strictly: {cur.timestamp} "
                    f"after {prev.timestamp}")


CELL_MANIPULATABLE = "manipulatable"
CELL_UNSTRUCTURED = "unstructured"
CELL_UNKNOWN = "unknown"


@dataclass
class ConfigurationMap:
    """Spatial classification of visited cells built from an exploration log."""

    cell_size: float
    cells: dict
    safety_threshold: float

    def classify(self, point) -> str:
        key = tuple(int(math.floor(c / self.cell_size)) for c in point)
        info = self.cells.get(key)
        return info["status"] if info else CELL_UNKNOWN

    def counts(self) -> dict:
        out = {CELL_MANIPULATABLE: 0, CELL_UNSTRUCTURED: 0}
        for info in self.cells.values():
            out[info["status"]] += 1
        return out


def build_configuration_map(log: ExplorationLog, cell_size: float,
                            safety_threshold: float = 50.0) -> ConfigurationMap:
    """Fold the log into per-cell classifications.

    A visit marks its tip cell manipulatable unless the sensor came back
    sub-threshold or the plant failed to converge there; unstructured evidence
    always wins over manipulatable evidence in the same cell.
    """
    if not log.entries:
        raise ParameterError("exploration log is empty")
    log.validate()
    cells: dict = {}
    for i, entry in enumerate(log.entries):
        key = tuple(int(math.floor(c / cell_size)) for c in entry.tip)
        obstructed = (entry.sensor is not None and entry.sensor.hit
                      and entry.sensor.distance < safety_threshold)
        status = (CELL_UNSTRUCTURED if obstructed or not entry.converged
                  else CELL_MANIPULATABLE)
        info = cells.setdefault(key, {"status": status, "entries": []})
        info["entries"].append(i)
        if status == CELL_UNSTRUCTURED:
            info["status"] = CELL_UNSTRUCTURED
    return ConfigurationMap(cell_size=cell_size, cells=cells,
                            safety_threshold=safety_threshold)


def run_exploration(rig: Rig, env: Environment, pose_sequence,
                    geometry: ControlGeometry | None = None,
                    safety_threshold: float = 50.0,
                    params: RelaxParams | None = None,
                    dt: float = 1.0) -> ExplorationLog:
    """Scripted exploration: visit poses, sense, drop stiffness near obstacles.

    The stiffness rule mirrors the closed loop: any sub-threshold reading makes
    the next command low-stiffness.
    """
    geometry = geometry or ControlGeometry.from_rig(rig)
    params = params or _SWEEP_PARAMS
    log = ExplorationLog()
    stiffness = "high"
    state = rig.rest_state()
    for k, (alpha, beta) in enumerate(pose_sequence):
        command = ik_constant_curvature((alpha, beta), geometry,
                                        stiffness=stiffness)
        state = settle(rig, command, state=state, params=params)
        tip = rig.tip(state.coords)
        direction = _tip_direction(rig, state.coords)
        pose = PoseConfig(alpha=alpha, beta=beta, tip=tuple(tip))
        reading = sense_infrared(env, pose, direction, timestamp=(k + 1) * dt)
        target = np.asarray(fk_tip(geometry, alpha, beta))
        log.append(ExplorationEntry(
            timestamp=(k + 1) * dt, alpha=alpha, beta=beta,
            delta_l=command.delta_l, stiffness=stiffness, sensor=reading,
            tip=tuple(tip),
            distance_to_trajectory=float(np.linalg.norm(tip - target)),
            converged=state.converged))
        stiffness = ("low" if reading.hit
                     and reading.distance < safety_threshold else "high")
    return log


def fk_tip(geometry: ControlGeometry, alpha: float, beta: float):
    from .control import _cc_tip
    return geometry.to_world(_cc_tip(alpha, beta, geometry.arc_length))


def _tip_direction(rig: Rig, coords) -> np.ndarray:
    """Sensor boresight: from the last ring centroid through the tip."""
    rings = rig.model.level_rings()
    anchored_top = all(nd in rig.anchors.fixed for nd in rings[-1])
    tip_ring, prev_ring = (rings[0], rings[1]) if anchored_top else (
        rings[-1], rings[-2])
    tip_c = coords[[rig.model.node_index(nd) for nd in tip_ring]].mean(axis=0)
    prev_c = coords[[rig.model.node_index(nd) for nd in prev_ring]].mean(axis=0)
    d = tip_c - prev_c
    return d / np.linalg.norm(d)
