"""Long-term degradation models: prestress decay and routing friction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dynamics import ActuationCommand, RelaxParams, Rig, settle
from .errors import ParameterError
from .fdm import EquilibriumState
from .topology import NodeId


@dataclass(frozen=True)
class DegradationState:
    """Aging inputs: elapsed time, relaxation rate, and joint friction."""

    elapsed: float = 0.0
    decay_rate: float = 0.0
    friction_mu: float = 0.0
    wrap_angles: dict = field(default_factory=dict)
    default_wrap: float = 0.0

    def __post_init__(self):
        if self.decay_rate < 0:
            raise ParameterError("decay_rate must be >= 0")
        if self.friction_mu < 0:
            raise ParameterError("friction_mu must be >= 0")
        for joint, angle in self.wrap_angles.items():
            if not 0.0 <= angle <= 2.0 * math.pi:
                label = joint.label() if isinstance(joint, NodeId) else joint
                raise ParameterError(
                    f"wrap angle at {label} must lie in [0, 2*pi]")
        if not 0.0 <= self.default_wrap <= 2.0 * math.pi:
            raise ParameterError("default_wrap must lie in [0, 2*pi]")

    def wrap_angle_at(self, joint) -> float:
        return self.wrap_angles.get(joint, self.default_wrap)


def capstan_attenuate(tension_in: float, mu: float, wrap_angle: float) -> float:
    """Tension left after sliding over one joint: T * exp(-mu * wrap)."""
    if tension_in < 0:
        raise ParameterError("tension_in must be >= 0")
    return tension_in * math.exp(-mu * wrap_angle)


def apply_prestress_decay(rig: Rig, state: EquilibriumState,
                          degradation: DegradationState,
                          params: RelaxParams | None = None) -> EquilibriumState:
    """Scale prestress by exp(-decay_rate * elapsed) and re-equilibrate.

    elapsed = 0 (or rate 0) returns the state untouched; successive decays
    compose multiplicatively (semigroup of the exponential law).
    """
    if degradation.elapsed < 0:
        raise ParameterError("elapsed must be >= 0")
    factor = math.exp(-degradation.decay_rate * degradation.elapsed)
    if factor == 1.0:
        return state
    new_scale = state.prestress_scale * factor
    relaxed = settle(rig, ActuationCommand(stiffness=new_scale), state=state,
                     params=params)
    return relaxed
