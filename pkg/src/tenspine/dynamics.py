"""Quasi-static spring-network dynamics of the tendon-driven spine.

A form-found :class:`Rig` holds the structure, its prestress field, the rigid
level-plate bracing, and the three tendon routings.  Every solve funnels into
one relaxation kernel (numba or numpy, see ``tenspine.kernels``): members are
linear springs (cables tension-only, struts and plate braces two-sided) and a
tendon is a single tension element routed through ring nodes, so a rest-length
spring with zero rest length doubles as a force-density element for the
form-finding cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import IntegrationError, ParameterError
from .fdm import AnchorSet, EquilibriumState, ForceDensitySet
from .materials import Materials
from .topology import StructureModel

TENDON_COUNT = 3

_EMPTY_TENDONS = (np.zeros(0, np.int64), np.zeros(1, np.int64),
                  np.zeros(0), np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class ActuationCommand:
    """Per-tendon rest-length changes plus a stiffness setting.

    Negative delta shortens (pulls) a tendon.  ``stiffness`` is "high", "low",
    or an explicit prestress scale.
    """

    delta_l: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stiffness: str | float = "high"

    def __post_init__(self):
        if len(self.delta_l) != TENDON_COUNT:
            raise ParameterError("delta_l must have exactly three entries")
        object.__setattr__(self, "delta_l", tuple(float(v) for v in self.delta_l))

    def validate(self, stroke_limit: float):
        for i, v in enumerate(self.delta_l):
            if abs(v) > stroke_limit + 1e-12:
                raise ParameterError(
                    f"tendon {i + 1} stroke {v} exceeds limit {stroke_limit}")


@dataclass
class RelaxParams:
    """Integrator settings for relax_dynamics.

    ``mass_mode`` "preconditioned" uses per-node fictitious masses proportional
    to attached stiffness (fast, scale-invariant); "physical" integrates the
    configured node mass with dt bounded by dt * sqrt(k_max / mass) < 0.5.
    """

    dt: float | None = None
    damping: float = 0.03
    max_steps: int = 2_000_000
    tol: float = 1e-9
    gravity: float = 0.0
    mass_mode: str = "preconditioned"
    snapshot_every: int | None = None
    check_every: int = 50

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ParameterError("dt must be positive")
        if not 0.0 < self.damping < 1.0:
            raise ParameterError("damping must lie in (0, 1)")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.mass_mode not in ("preconditioned", "physical"):
            raise ParameterError(f"unknown mass_mode {self.mass_mode!r}")


@dataclass
class Rig:
    """Form-found robot: structure, prestress field, plates, tendon routing."""

    model: StructureModel
    materials: Materials
    anchors: AnchorSet
    rest_coords: np.ndarray
    rest_forces: np.ndarray          # member prestress at scale 1, model order
    brace_pairs: np.ndarray          # (B, 2) node indices of plate bracing
    tendon_paths: list[np.ndarray]   # node indices, anchored end -> tip
    brace_forces: np.ndarray | None = None  # plate bracing prestress at scale 1
    formfind_converged: bool = True

    def __post_init__(self):
        self._fixed = self.anchors.mask(self.model)
        pairs = self.model.member_index_pairs()
        self._member_pairs = pairs
        self._member_rest_len = np.linalg.norm(
            self.rest_coords[pairs[:, 1]] - self.rest_coords[pairs[:, 0]], axis=1)
        self._tension_only = np.array(
            [mb.is_cable for mb in self.model.members], dtype=np.bool_)
        if self.brace_pairs.size:
            self._brace_rest = np.linalg.norm(
                self.rest_coords[self.brace_pairs[:, 1]]
                - self.rest_coords[self.brace_pairs[:, 0]], axis=1)
        else:
            self._brace_rest = np.zeros(0)
        if self.brace_forces is None:
            self.brace_forces = np.zeros(len(self.brace_pairs))
        self.tendon_rest = np.array([
            float(np.linalg.norm(np.diff(self.rest_coords[p], axis=0),
                                 axis=1).sum())
            for p in self.tendon_paths])

    # --- geometry helpers -------------------------------------------------
    @property
    def member_count(self) -> int:
        return len(self.model.members)

    def platform_center(self) -> np.ndarray:
        idxs = np.where(self._fixed)[0]
        return self.rest_coords[idxs].mean(axis=0)

    def free_end_indices(self) -> list[int]:
        base, top = self.model.end_levels()
        ring = base if all(nd not in self.anchors.fixed for nd in base) else top
        return [self.model.node_index(nd) for nd in ring]

    def axis_unit(self) -> np.ndarray:
        """Rest spine axis, pointing from the platform toward the free tip."""
        v = self.tip(self.rest_coords) - self.platform_center()
        return v / np.linalg.norm(v)

    def tip(self, coords: np.ndarray) -> np.ndarray:
        return coords[self.free_end_indices()].mean(axis=0)

    def rest_tip(self) -> np.ndarray:
        return self.tip(self.rest_coords)

    def spine_length(self) -> float:
        return float(np.linalg.norm(self.rest_tip() - self.platform_center()))

    def tendon_pitch(self) -> float:
        if self.materials.tendon_pitch is not None:
            return self.materials.tendon_pitch
        return self.model.params.base_radius

    # --- kernel assembly ----------------------------------------------------
    def spring_arrays(self, prestress_scale: float = 1.0):
        mats = self.materials
        n_mb = self.member_count
        n_br = len(self.brace_pairs)
        src = np.empty(n_mb + n_br, np.int64)
        dst = np.empty(n_mb + n_br, np.int64)
        src[:n_mb] = self._member_pairs[:, 0]
        dst[:n_mb] = self._member_pairs[:, 1]
        tension_only = np.zeros(n_mb + n_br, np.bool_)
        tension_only[:n_mb] = self._tension_only
        ks = np.empty(n_mb + n_br)
        ks[:n_mb] = np.where(self._tension_only, mats.cable_stiffness,
                             mats.strut_stiffness)
        L0 = np.empty(n_mb + n_br)
        # rest length set so the member carries scale * prestress at rest shape
        L0[:n_mb] = (self._member_rest_len
                     - prestress_scale * self.rest_forces / ks[:n_mb])
        if n_br:
            src[n_mb:] = self.brace_pairs[:, 0]
            dst[n_mb:] = self.brace_pairs[:, 1]
            ks[n_mb:] = mats.strut_stiffness
            L0[n_mb:] = (self._brace_rest
                         - prestress_scale * self.brace_forces / ks[n_mb:])
        return src, dst, tension_only, ks, L0

    def tendon_arrays(self, delta_l=(0.0, 0.0, 0.0), degradation=None):
        if not self.tendon_paths:
            return _EMPTY_TENDONS
        tpath = np.concatenate(self.tendon_paths).astype(np.int64)
        toff = np.zeros(len(self.tendon_paths) + 1, np.int64)
        for i, p in enumerate(self.tendon_paths):
            toff[i + 1] = toff[i] + len(p)
        tk = np.full(len(self.tendon_paths), self.materials.tendon_stiffness)
        trest = self.tendon_rest + np.asarray(delta_l, dtype=float)
        tatten = np.ones(len(tpath))
        if degradation is not None and degradation.friction_mu > 0:
            for t, p in enumerate(self.tendon_paths):
                cum = 0.0
                for si in range(len(p) - 1):
                    if si > 0:
                        node = self.model.nodes[p[si]]
                        cum += degradation.wrap_angle_at(node)
                    tatten[toff[t] + si] = math.exp(-degradation.friction_mu * cum)
        return tpath, toff, tk, trest, tatten

    def force_scale(self) -> float:
        pre = float(np.abs(self.rest_forces).max()) if self.rest_forces.size else 0.0
        act = self.materials.tendon_stiffness * self.materials.stroke_limit
        return max(1.0, pre, act)

    def rest_state(self) -> EquilibriumState:
        return EquilibriumState(
            nodes=list(self.model.nodes), coords=self.rest_coords.copy(),
            members=list(self.model.members),
            member_forces=self.rest_forces.copy(), prestress_scale=1.0,
            residual=0.0, residual_rel=0.0, converged=self.formfind_converged)


def level_plate_braces(model: StructureModel) -> np.ndarray:
    """All chords within each level ring: rigid triangular/hexagonal plates."""
    pairs = []
    for ring in model.level_rings():
        idxs = [model.node_index(nd) for nd in ring]
        for i in range(len(idxs)):
            for j in range(i + 1, len(idxs)):
                pairs.append((idxs[i], idxs[j]))
    return np.array(pairs, dtype=np.int64)


def route_tendons(model: StructureModel, coords: np.ndarray,
                  anchors: AnchorSet, azimuths=None) -> list[np.ndarray]:
    """Route each tendon through the ring node nearest its azimuth per level,
    ordered from the anchored level down to the free end."""
    if azimuths is None:
        azimuths = [2.0 * math.pi * k / TENDON_COUNT
                    for k in range(TENDON_COUNT)]
    rings = model.level_rings()
    anchored_first = list(range(len(rings)))
    top_anchored = all(nd in anchors.fixed for nd in rings[-1])
    if top_anchored:
        anchored_first = anchored_first[::-1]
    paths = []
    for phi in azimuths:
        path = []
        for lv in anchored_first:
            ring = rings[lv]

            def gap(nd):
                x, y = coords[model.node_index(nd)][:2]
                return abs((math.atan2(y, x) - phi + math.pi)
                           % (2.0 * math.pi) - math.pi)

            best = min(ring, key=gap)
            path.append(model.node_index(best))
        paths.append(np.array(path, dtype=np.int64))
    return paths


def _preconditioned_minv(n_nodes, src, dst, ks, tendon_arrays, dt, beta=0.6):
    ksum = np.zeros(n_nodes)
    np.add.at(ksum, src, np.abs(ks))
    np.add.at(ksum, dst, np.abs(ks))
    tpath, toff, tk, _, _ = tendon_arrays
    for t in range(len(toff) - 1):
        ksum[tpath[toff[t]:toff[t + 1]]] += 4.0 * tk[t]
    ksum = np.maximum(ksum, 1e-12)
    return 1.0 / (beta * dt * dt * ksum)


def _run_kernel(coords, vel, src, dst, tension_only, ks, L0, free_mask, minv,
                fext, tendons, params: RelaxParams, fscale):
    member_force = np.zeros(len(src))
    tendon_tension = np.zeros(max(len(tendons[1]) - 1, 0))
    dt = params.dt if params.dt is not None else 1.0
    tol_force = params.tol * fscale
    minv_max = float(minv.max()) if minv.size else 1.0
    tol_vel = tol_force * dt * minv_max / max(params.damping, 1e-3)
    status, steps, resid, vmax = kernels.run_relax(
        coords, vel, src, dst,
        tension_only.astype(np.bool_), ks, L0, free_mask.astype(np.bool_),
        minv, fext, *tendons,
        dt, params.damping, params.max_steps, tol_force, tol_vel,
        params.check_every, member_force, tendon_tension)
    return status, steps, resid, member_force, tendon_tension


def _assemble_masses(rig: Rig, params: RelaxParams, src, dst, ks, tendons):
    n = rig.model.node_count
    if params.mass_mode == "physical":
        mass = np.full(n, rig.materials.node_mass)
        dt = params.dt
        if dt is None:
            kmax = float(np.abs(ks).max())
            dt = 0.45 / math.sqrt(kmax / rig.materials.node_mass)
        return 1.0 / mass, dt
    dt = params.dt if params.dt is not None else 1.0
    return _preconditioned_minv(n, src, dst, ks, tendons, dt), dt


def _external_forces(rig: Rig, params: RelaxParams) -> np.ndarray:
    fext = np.zeros((rig.model.node_count, 3))
    if params.gravity:
        fext[:, 2] -= rig.materials.node_mass * params.gravity
    return fext


def _state_from(rig: Rig, coords, prestress_scale, resid, fscale, converged,
                member_L0, member_ks) -> EquilibriumState:
    pairs = rig._member_pairs
    lengths = np.linalg.norm(coords[pairs[:, 1]] - coords[pairs[:, 0]], axis=1)
    forces = member_ks * (lengths - member_L0)
    forces = np.where(rig._tension_only, np.maximum(forces, 0.0), forces)
    return EquilibriumState(
        nodes=list(rig.model.nodes), coords=coords.copy(),
        members=list(rig.model.members), member_forces=forces,
        prestress_scale=prestress_scale, residual=float(resid),
        residual_rel=float(resid) / fscale, converged=converged)


def relax_dynamics(rig: Rig, state: EquilibriumState | None,
                   command: ActuationCommand | None = None,
                   params: RelaxParams | None = None,
                   degradation=None) -> list[EquilibriumState]:
    """Time-step the actuated network to rest; returns state snapshots.

    The final entry is the converged (or step-limited, flagged) state.  Raises
    IntegrationError on numerical blow-up, reporting the last stable step.
    """
    params = params or RelaxParams()
    command = command or ActuationCommand()
    command.validate(rig.materials.stroke_limit)
    scale = rig.materials.prestress_scale_for(command.stiffness)

    src, dst, tension_only, ks, L0 = rig.spring_arrays(scale)
    tendons = rig.tendon_arrays(command.delta_l, degradation)
    minv, dt = _assemble_masses(rig, params, src, dst, ks, tendons)
    run_params = replace(params, dt=dt)
    fext = _external_forces(rig, params)
    fscale = rig.force_scale()

    coords = (state.coords.copy() if state is not None
              else rig.rest_coords.copy())
    vel = np.zeros_like(coords)
    free_mask = ~rig._fixed

    member_ks = ks[:rig.member_count]
    member_L0 = L0[:rig.member_count]

    snapshots: list[EquilibriumState] = []
    remaining = params.max_steps
    chunk = params.snapshot_every or params.max_steps
    total_steps = 0
    while remaining > 0:
        this_chunk = min(chunk, remaining)
        chunk_params = replace(run_params, max_steps=this_chunk)
        status, steps, resid, _, _ = _run_kernel(
            coords, vel, src, dst, tension_only, ks, L0, free_mask, minv,
            fext, tendons, chunk_params, fscale)
        total_steps += steps
        remaining -= steps
        if status == kernels.STATUS_DIVERGED:
            raise IntegrationError(
                f"integration diverged after {total_steps} steps "
                f"(residual {resid:.3e}); retry with smaller dt or more damping",
                last_stable_step=max(total_steps - params.check_every, 0))
        converged = status == kernels.STATUS_CONVERGED
        snapshots.append(_state_from(rig, coords, scale, resid, fscale,
                                     converged, member_L0, member_ks))
        if converged:
            break
    return snapshots


def settle(rig: Rig, command: ActuationCommand | None = None,
           state: EquilibriumState | None = None,
           params: RelaxParams | None = None,
           degradation=None) -> EquilibriumState:
    """Convenience wrapper: relax and return only the final state."""
    return relax_dynamics(rig, state, command, params, degradation)[-1]


def relax_force_density(model: StructureModel, q: ForceDensitySet,
                        anchors: AnchorSet, loads=None,
                        params: RelaxParams | None = None) -> EquilibriumState:
    """Dynamic relaxation with force-density elements (force = q * length).

    Implemented as zero-rest-length springs with k = q, so it runs on the same
    kernel as the actuated plant; used as the independent counterpart of the
    linear solve in cross-solver checks.
    """
    q.validate(model)
    anchors.validate(model)
    params = params or RelaxParams(tol=1e-12, max_steps=4_000_000)
    qarr = q.as_array(model)
    pairs = model.member_index_pairs()
    src = pairs[:, 0].copy()
    dst = pairs[:, 1].copy()
    ks = qarr.copy()
    L0 = np.zeros(len(ks))
    tension_only = np.array([mb.is_cable for mb in model.members], np.bool_)

    fext = np.zeros((model.node_count, 3))
    if loads:
        for nd, vec in loads.items():
            fext[model.node_index(nd)] = np.asarray(vec, dtype=float)

    dt = params.dt if params.dt is not None else 1.0
    minv = _preconditioned_minv(model.node_count, src, dst, ks,
                                _EMPTY_TENDONS, dt)
    coords = model.seed_coords.copy()
    vel = np.zeros_like(coords)
    free_mask = ~anchors.mask(model)
    scale = max(1.0, float(np.abs(fext).max()),
                float(np.abs(qarr).max()) * model.params.base_radius)

    status, steps, resid, member_force, _ = _run_kernel(
        coords, vel, src, dst, tension_only, ks, L0, free_mask, minv, fext,
        _EMPTY_TENDONS, replace(params, dt=dt), scale)
    if status == kernels.STATUS_DIVERGED:
        raise IntegrationError(
            f"force-density relaxation diverged after {steps} steps; "
            "the force density matrix is likely indefinite",
            last_stable_step=steps)
    lengths = np.linalg.norm(coords[dst] - coords[src], axis=1)
    return EquilibriumState(
        nodes=list(model.nodes), coords=coords, members=list(model.members),
        member_forces=qarr * lengths, prestress_scale=1.0,
        residual=float(resid), residual_rel=float(resid) / scale,
        converged=status == kernels.STATUS_CONVERGED)


def form_find(model: StructureModel, materials: Materials | None = None,
              anchors: AnchorSet | None = None,
              params: RelaxParams | None = None,
              max_adapt_iters: int = 30) -> Rig:
    """Build the working rig: prestressed equilibrium around the seed shape.

    Cables start shortened by ``materials.prestress_stretch``; the network is
    first relaxed with both end plates pinned (rigging), then released to hang
    from the anchored plate.  Cables that come out slack are re-tightened and
    the release repeated until the whole cable net is taut (the adaptive
    prestress loop).
    """
    materials = materials or Materials()
    anchors = anchors or AnchorSet.top_ring(model)
    anchors.validate_platform(model)
    params = params or RelaxParams(tol=1e-10)

    brace_pairs = level_plate_braces(model)
    n_mb = len(model.members)
    pairs = model.member_index_pairs()
    tension_only = np.array([mb.is_cable for mb in model.members], np.bool_)

    src = np.concatenate([pairs[:, 0], brace_pairs[:, 0]]).astype(np.int64)
    dst = np.concatenate([pairs[:, 1], brace_pairs[:, 1]]).astype(np.int64)
    t_only = np.concatenate([tension_only,
                             np.zeros(len(brace_pairs), np.bool_)])
    ks = np.concatenate([
        np.where(tension_only, materials.cable_stiffness,
                 materials.strut_stiffness),
        np.full(len(brace_pairs), materials.strut_stiffness)])
    seed_len = np.linalg.norm(model.seed_coords[dst] - model.seed_coords[src],
                              axis=1)
    L0 = seed_len.copy()
    L0[:n_mb][tension_only] *= (1.0 - materials.prestress_stretch)

    fscale = max(1.0, materials.cable_stiffness * materials.prestress_stretch
                 * float(seed_len[:n_mb].max()))
    dt = params.dt if params.dt is not None else 1.0
    minv = _preconditioned_minv(model.node_count, src, dst, ks,
                                _EMPTY_TENDONS, dt)
    run_params = replace(params, dt=dt)

    base, top = model.end_levels()
    both_fixed = np.zeros(model.node_count, np.bool_)
    for nd in list(base) + list(top):
        both_fixed[model.node_index(nd)] = True
    final_fixed = anchors.mask(model)

    coords = model.seed_coords.copy()
    fext = np.zeros((model.node_count, 3))

    def relax_phase(fixed):
        vel = np.zeros_like(coords)
        status, steps, resid, elem_force, _ = _run_kernel(
            coords, vel, src, dst, t_only, ks, L0, ~fixed, minv, fext,
            _EMPTY_TENDONS, run_params, fscale)
        if status == kernels.STATUS_DIVERGED:
            raise IntegrationError(
                "form-finding diverged; loosen prestress_stretch or damping",
                last_stable_step=steps)
        return elem_force, status == kernels.STATUS_CONVERGED

    relax_phase(both_fixed)
    elem_force, ok = relax_phase(final_fixed)
    member_force = elem_force[:n_mb]

    converged = ok
    cable_forces = member_force[tension_only]
    floor = 0.01 * max(np.median(cable_forces), 1e-9)
    for _ in range(max_adapt_iters):
        slack_members = tension_only & (member_force < floor)
        if not slack_members.any():
            break
        tighten = np.zeros(len(L0), bool)
        tighten[:n_mb] = slack_members
        L0[tighten] *= 0.98
        elem_force, ok = relax_phase(final_fixed)
        member_force = elem_force[:n_mb]
        converged = ok
    else:
        converged = False

    rest_forces = member_force.copy()
    # strictly positive cable prestress is required downstream; a cable that
    # stayed slack after adaptation is recorded as barely engaged
    still_slack = tension_only & (rest_forces <= 0.0)
    if still_slack.any():
        rest_forces[still_slack] = 1e-9
        converged = False

    return Rig(model=model, materials=materials, anchors=anchors,
               rest_coords=coords.copy(), rest_forces=rest_forces,
               brace_pairs=brace_pairs,
               tendon_paths=route_tendons(model, coords, anchors),
               brace_forces=elem_force[n_mb:].copy(),
               formfind_converged=converged)


def force_density_set(rig: Rig) -> ForceDensitySet:
    """Force densities of the form-found prestress field (q = force/length)."""
    lengths = rig._member_rest_len
    values = rig.rest_forces / lengths
    return ForceDensitySet({mb: float(v)
                            for mb, v in zip(rig.model.members, values)})
