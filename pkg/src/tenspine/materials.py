"""Material parameters and named presets.

Preset stiffness values are chosen for numerical stability at desk scale and
are NOT calibrated against any physical specimen; treat them as starting
points when modelling real hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ParameterError

# spring constant (force / length-unit of stretch) per preset name
MATERIAL_PRESETS = {
    "rubber-thread": 5.0,
    "dyneema-thread": 2.0,
    "carbon-fiber-tube": 5000.0,
    "pvc-corrugated-pipe": 800.0,
}


@dataclass(frozen=True)
class Materials:
    """Stiffness, actuation, and prestress settings for one model."""

    cable_stiffness: float = 5.0
    strut_stiffness: float = 5000.0
    tendon_stiffness: float = 2.0
    node_mass: float = 1.0
    winder_radius: float = 5.0
    tendon_pitch: float | None = None   # defaults to base_radius when wired up
    stroke_limit: float = 60.0
    prestress_stretch: float = 0.12     # form-finding cable shortening fraction
    prestress_high: float = 1.0
    prestress_low: float = 0.3
    max_tension: float = 1e4            # fracture-guard warning threshold

    def __post_init__(self):
        for name in ("cable_stiffness", "strut_stiffness", "tendon_stiffness",
                     "node_mass", "winder_radius", "stroke_limit"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if not 0.0 < self.prestress_stretch < 0.5:
            raise ParameterError("prestress_stretch must lie in (0, 0.5)")
        if self.prestress_low <= 0 or self.prestress_high <= 0:
            raise ParameterError("prestress scales must be positive")

    def prestress_scale_for(self, level) -> float:
        """Resolve a stiffness level tag or explicit scale to a multiplier."""
        if isinstance(level, str):
            if level == "high":
                return self.prestress_high
            if level == "low":
                return self.prestress_low
            raise ParameterError(f"unknown stiffness level {level!r}")
        scale = float(level)
        if scale <= 0:
            raise ParameterError("prestress scale must be positive")
        return scale

    @classmethod
    def from_presets(cls, cable="rubber-thread", strut="carbon-fiber-tube",
                     actuator="dyneema-thread", **overrides) -> "Materials":
        for name in (cable, strut, actuator):
            if name not in MATERIAL_PRESETS:
                raise ParameterError(f"unknown material preset {name!r}")
        base = cls(cable_stiffness=MATERIAL_PRESETS[cable],
                   strut_stiffness=MATERIAL_PRESETS[strut],
                   tendon_stiffness=MATERIAL_PRESETS[actuator])
        return replace(base, **overrides) if overrides else base
