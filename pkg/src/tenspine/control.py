"""Tendon control stack: winder conversion, constant-curvature IK/FK, the
proportional closed loop, and the simulated infrared sensor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ActuationCommand, Rig, TENDON_COUNT
from .environment import Environment
from .errors import ParameterError, ReachabilityError

SUM_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class MotorAngles:
    """Winder angles equivalent to tendon length changes (arc formula)."""

    theta: tuple[float, float, float]
    winder_radius: float

    def __post_init__(self):
        if self.winder_radius <= 0:
            raise ParameterError("winder_radius must be positive")


def lengths_to_angles(delta_l, winder_radius: float) -> MotorAngles:
    """Arc of a circle: each length change is theta * r, so theta = dL / r."""
    if winder_radius <= 0:
        raise ParameterError("winder_radius must be positive")
    theta = tuple(float(dl) / winder_radius for dl in delta_l)
    return MotorAngles(theta=theta, winder_radius=winder_radius)


def angles_to_lengths(angles: MotorAngles) -> tuple[float, float, float]:
    return tuple(t * angles.winder_radius for t in angles.theta)


def tendon_strain(delta_l, rest_lengths) -> tuple[float, float, float]:
    """Per-tendon strain: length change over original length."""
    out = []
    for dl, l0 in zip(delta_l, rest_lengths):
        if l0 <= 0:
            raise ParameterError("rest lengths must be positive")
        out.append(float(dl) / float(l0))
    return tuple(out)


@dataclass(frozen=True)
class PoseConfig:
    """Bent-spine configuration: yaw alpha, pitch beta, and tip position."""

    alpha: float
    beta: float
    tip: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")
        alpha = self.alpha % (2.0 * math.pi)
        if self.beta == 0.0:
            alpha = 0.0
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "tip", tuple(float(v) for v in self.tip))


@dataclass(frozen=True)
class ControlGeometry:
    """Constant-curvature command model of the 3-tendon segment.

    Poses and tips live in the platform frame: origin at the anchored plate,
    z pointing down the spine toward the free tip.
    """

    pitch_radius: float = 60.0
    arc_length: float = 400.0
    azimuths: tuple[float, float, float] = tuple(
        2.0 * math.pi * k / TENDON_COUNT for k in range(TENDON_COUNT))
    bend_limit: float = 0.5 * math.pi
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        if self.pitch_radius <= 0:
            raise ParameterError("pitch_radius must be positive")
        if self.arc_length <= 0:
            raise ParameterError("arc_length must be positive")
        if self.bend_limit <= 0:
            raise ParameterError("bend_limit must be positive")

    @classmethod
    def from_rig(cls, rig: Rig, bend_limit: float = 0.5 * math.pi) -> "ControlGeometry":
        origin = rig.platform_center()
        z = rig.axis_unit()
        x = np.array([1.0, 0.0, 0.0])
        x = x - (x @ z) * z
        if np.linalg.norm(x) < 1e-9:
            x = np.array([0.0, 1.0, 0.0]) - (np.array([0.0, 1.0, 0.0]) @ z) * z
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        rot = np.stack([x, y, z], axis=1)  # platform->world columns
        azimuths = []
        for path in rig.tendon_paths:
            # azimuth of the mid-route attachment in the platform frame
            mid = rig.rest_coords[path[len(path) // 2]]
            local = rot.T @ (mid - origin)
            azimuths.append(math.atan2(local[1], local[0]) % (2.0 * math.pi))
        pitch = float(np.mean([
            np.linalg.norm((rot.T @ (rig.rest_coords[p[len(p) // 2]] - origin))[:2])
            for p in rig.tendon_paths]))
        return cls(pitch_radius=pitch, arc_length=rig.spine_length(),
                   azimuths=tuple(azimuths), bend_limit=bend_limit,
                   origin=tuple(origin), rotation=tuple(map(tuple, rot)))

    def rot(self) -> np.ndarray:
        return np.asarray(self.rotation, float)

    def to_world(self, local_point) -> np.ndarray:
        return np.asarray(self.origin) + self.rot() @ np.asarray(local_point, float)

    def to_platform(self, world_point) -> np.ndarray:
        return self.rot().T @ (np.asarray(world_point, float) - np.asarray(self.origin))


def ik_constant_curvature(pose, geometry: ControlGeometry,
                          stiffness="high") -> ActuationCommand:
    """Tendon length changes for a bend: dL_i = -beta * d * cos(alpha - phi_i)."""
    alpha, beta = (pose.alpha, pose.beta) if isinstance(pose, PoseConfig) else pose
    if beta < 0:
        raise ReachabilityError("beta must be >= 0")
    if beta > geometry.bend_limit:
        raise ReachabilityError(
            f"beta {beta} exceeds bend limit {geometry.bend_limit}")
    d = geometry.pitch_radius
    delta = tuple(-beta * d * math.cos(alpha - phi) for phi in geometry.azimuths)
    return ActuationCommand(delta_l=delta, stiffness=stiffness)


def _cc_tip(alpha: float, beta: float, arc_length: float) -> np.ndarray:
    if beta < 1e-12:
        return np.array([0.0, 0.0, arc_length])
    radius = arc_length / beta
    planar = radius * (1.0 - math.cos(beta))
    return np.array([math.cos(alpha) * planar, math.sin(alpha) * planar,
                     radius * math.sin(beta)])


def fk_constant_curvature(command, geometry: ControlGeometry,
                          warn_inconsistent: bool = True) -> PoseConfig:
    """Recover (alpha, beta) and the arc tip from tendon length changes.

    Length triples outside the constant-curvature subspace (nonzero sum) are
    projected onto it; a warning reports the dropped common mode.
    """
    delta = np.asarray(command.delta_l if isinstance(command, ActuationCommand)
                       else command, float)
    total = float(delta.sum())
    scale = max(1.0, float(np.abs(delta).max()))
    if abs(total) > SUM_ZERO_TOL * scale:
        if warn_inconsistent:
            import warnings
            warnings.warn(
                f"delta_l sum {total:.3e} is outside the constant-curvature "
                "subspace; projecting")
        delta = delta - total / len(delta)
    phis = geometry.azimuths
    a = sum(dl * math.cos(phi) for dl, phi in zip(delta, phis))
    b = sum(dl * math.sin(phi) for dl, phi in zip(delta, phis))
    d = geometry.pitch_radius
    amp = math.hypot(a, b)
    beta = 2.0 * amp / (len(phis) * d)
    alpha = math.atan2(-b, -a) % (2.0 * math.pi) if amp > 0 else 0.0
    tip_local = _cc_tip(alpha, beta, geometry.arc_length)
    return PoseConfig(alpha=alpha, beta=beta,
                      tip=tuple(geometry.to_world(tip_local)))


def fk_tip_world(delta_l, geometry: ControlGeometry) -> np.ndarray:
    pose = fk_constant_curvature(delta_l, geometry, warn_inconsistent=False)
    return np.asarray(pose.tip)


@dataclass(frozen=True)
class SensorReading:
    """One infrared sample: nearest obstacle distance and thermal signature."""

    distance: float | None
    thermal: float
    timestamp: float
    hit: bool

    def __post_init__(self):
        if self.hit and (self.distance is None or self.distance <= 0):
            raise ParameterError("hit readings need a positive distance")


def sense_infrared(env: Environment, tip_pose: PoseConfig, ray_direction,
                   timestamp: float = 0.0) -> SensorReading:
    """Ray-cast from the tip; nearest obstacle wins, out-of-range is no-hit."""
    hit = env.raycast(np.asarray(tip_pose.tip, float), ray_direction)
    if hit is None:
        return SensorReading(distance=None, thermal=0.0, timestamp=timestamp,
                             hit=False)
    distance, thermal = hit
    return SensorReading(distance=distance, thermal=thermal,
                         timestamp=timestamp, hit=True)


@dataclass(frozen=True)
class HistoryEntry:
    command: ActuationCommand
    achieved: PoseConfig
    error_norm: float
    safety_hold: bool
    waypoint_index: int


@dataclass(frozen=True)
class ControllerState:
    """Proportional closed-loop tracker state (functional updates)."""

    geometry: ControlGeometry
    target: tuple
    gain: float = 0.5
    waypoint_tol: float = 2.0
    safety_threshold: float = 50.0
    stroke_limit: float = 60.0
    thermal_signature: float | None = None
    thermal_tol: float = 0.1
    waypoint_index: int = 0
    last_command: ActuationCommand = field(default_factory=ActuationCommand)
    history: tuple = ()

    def __post_init__(self):
        if self.gain <= 0:
            raise ParameterError("gain must be positive")
        if not self.target:
            raise ParameterError("target waypoint list must be nonempty")

    @property
    def finished(self) -> bool:
        return self.waypoint_index >= len(self.target)

    def current_waypoint(self) -> np.ndarray:
        i = min(self.waypoint_index, len(self.target) - 1)
        return np.asarray(self.target[i], float)

    def thermal_match(self, reading: SensorReading) -> bool:
        if self.thermal_signature is None or not reading.hit:
            return False
        return abs(reading.thermal - self.thermal_signature) < self.thermal_tol


def _cc_jacobian(delta_l, geometry: ControlGeometry, h: float = 1e-6) -> np.ndarray:
    """Finite-difference tip Jacobian of the constant-curvature model."""
    base = np.asarray(delta_l, float)
    J = np.zeros((3, 3))
    for k in range(3):
        dp = base.copy()
        dm = base.copy()
        dp[k] += h
        dm[k] -= h
        J[:, k] = (fk_tip_world(dp, geometry) - fk_tip_world(dm, geometry)) / (2 * h)
    return J


def calibrated_gain(rig: Rig, geometry: ControlGeometry,
                    base_gain: float = 0.5, probe: float = 10.0,
                    params=None) -> float:
    """Normalize the loop gain by the plant/model response ratio.

    Applies one probe command to the plant and compares the measured tip
    displacement with the constant-curvature prediction; the base gain is
    scaled by model/plant so one correction step removes roughly half the
    error despite the model mismatch.
    """
    from .dynamics import settle

    probe_cmd = ActuationCommand(delta_l=(-probe, probe / 2, probe / 2))
    rest_tip = rig.rest_tip()
    state = settle(rig, probe_cmd, params=params)
    measured = float(np.linalg.norm(rig.tip(state.coords) - rest_tip))
    predicted = float(np.linalg.norm(
        fk_tip_world(probe_cmd.delta_l, geometry)
        - fk_tip_world((0.0, 0.0, 0.0), geometry)))
    if measured < 1e-12:
        return base_gain
    return float(np.clip(base_gain * predicted / measured, base_gain,
                         16.0 * base_gain))


def step_closed_loop(ctl: ControllerState, achieved: PoseConfig,
                     sensor: SensorReading | None = None
                     ) -> tuple[ActuationCommand, ControllerState]:
    """One controller tick: safety check, waypoint advance, P-correction.

    A sub-threshold sensor distance always wins: the tendons hold and the
    stiffness drops to "low" (compliance response).
    """
    if ctl.finished:
        entry = HistoryEntry(ctl.last_command, achieved, 0.0, False,
                             ctl.waypoint_index)
        return ctl.last_command, replace(ctl, history=ctl.history + (entry,))

    if (sensor is not None and sensor.hit
            and sensor.distance < ctl.safety_threshold):
        command = replace(ctl.last_command, stiffness="low")
        entry = HistoryEntry(command, achieved,
                             float(np.linalg.norm(
                                 ctl.current_waypoint()
                                 - np.asarray(achieved.tip))),
                             True, ctl.waypoint_index)
        return command, replace(ctl, last_command=command,
                                history=ctl.history + (entry,))

    error = ctl.current_waypoint() - np.asarray(achieved.tip, float)
    err_norm = float(np.linalg.norm(error))
    waypoint_index = ctl.waypoint_index
    if err_norm < ctl.waypoint_tol:
        waypoint_index += 1
        command = ctl.last_command
        entry = HistoryEntry(command, achieved, err_norm, False, waypoint_index)
        return command, replace(ctl, waypoint_index=waypoint_index,
                                history=ctl.history + (entry,))

    J = _cc_jacobian(ctl.last_command.delta_l, ctl.geometry)
    correction = ctl.gain * (np.linalg.pinv(J, rcond=1e-8) @ error)
    new_delta = np.asarray(ctl.last_command.delta_l) + correction
    new_delta -= new_delta.sum() / 3.0
    new_delta = np.clip(new_delta, -ctl.stroke_limit, ctl.stroke_limit)
    command = replace(ctl.last_command, delta_l=tuple(new_delta))
    entry = HistoryEntry(command, achieved, err_norm, False, waypoint_index)
    return command, replace(ctl, last_command=command,
                            history=ctl.history + (entry,))
