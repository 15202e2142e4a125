"""tenspine: modeling, simulation, and control of a spine-like tendon-driven
tensegrity robot."""

from .analysis import (ConfigurationMap, ConfigurationSample, ExplorationEntry,
                       ExplorationLog, WorkspaceMetrics,
                       build_configuration_map, default_actuation_grid,
                       default_pose_grid, run_exploration, strain_map,
                       sweep_workspace)
from .control import (ControlGeometry, ControllerState, MotorAngles,
                      PoseConfig, SensorReading, fk_constant_curvature,
                      ik_constant_curvature, lengths_to_angles, sense_infrared,
                      step_closed_loop, tendon_strain)
from .degradation import (DegradationState, apply_prestress_decay,
                          capstan_attenuate)
from .dynamics import (ActuationCommand, RelaxParams, Rig, form_find,
                       force_density_set, relax_dynamics, relax_force_density,
                       settle)
from .environment import (BoxObstacle, Environment, SphereObstacle,
                          WallObstacle)
from .errors import (DanglingReferenceError, DivergenceError,
                     IntegrationError, LogIntegrityError, ModelFileError,
                     ParameterError, ReachabilityError, SchemaError,
                     SolvabilityError, SweepError, TenspineError,
                     TopologyError, VersionError)
from .fdm import (AdaptResult, AnchorSet, EquilibriumState, ForceDensitySet,
                  adapt_force_densities, solve_force_density)
from .materials import MATERIAL_PRESETS, Materials
from .plant import PlantSession, run_script
from .topology import (Member, NodeId, StructureModel, TopologyParams,
                       ValidationReport, cable_count_formulas,
                       generate_topology, validate_topology)

__version__ = "0.1.0"
