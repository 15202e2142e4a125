"""Force density method: linear equilibrium solve and adaptive retargeting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, SolvabilityError
from .topology import Member, NodeId, StructureModel


@dataclass
class ForceDensitySet:
    """One signed force density (force/length) per member.

    Sign convention: cables strictly positive, struts strictly negative.
    """

    q: dict[Member, float]

    @classmethod
    def uniform(cls, model: StructureModel, cable_q: float = 1.0,
                strut_q: float = -0.5) -> "ForceDensitySet":
        return cls({mb: (strut_q if mb.kind == "strut" else cable_q)
                    for mb in model.members})

    @classmethod
    def by_kind(cls, model: StructureModel, values: dict[str, float]) -> "ForceDensitySet":
        return cls({mb: values[mb.kind] for mb in model.members})

    def validate(self, model: StructureModel):
        missing = [mb for mb in model.members if mb not in self.q]
        if missing:
            raise ParameterError(
                f"force density set misses {len(missing)} members "
                f"(first: {missing[0].kind})")
        extra = len(self.q) - len(model.members)
        if extra:
            raise ParameterError(f"force density set has {extra} extra entries")
        for mb, value in self.q.items():
            if mb.is_cable and value <= 0:
                raise ParameterError(
                    f"cable {mb.kind} {mb.endpoints[0].label()}--"
                    f"{mb.endpoints[1].label()} needs q > 0, got {value}")
            if not mb.is_cable and value >= 0:
                raise ParameterError(
                    f"strut {mb.endpoints[0].label()}--"
                    f"{mb.endpoints[1].label()} needs q < 0, got {value}")

    def as_array(self, model: StructureModel) -> np.ndarray:
        return np.array([self.q[mb] for mb in model.members])

    def scaled(self, factor: float) -> "ForceDensitySet":
        return ForceDensitySet({mb: v * factor for mb, v in self.q.items()})


@dataclass(frozen=True)
class AnchorSet:
    """Nodes pinned to the mounting platform."""

    fixed: frozenset[NodeId]

    @classmethod
    def top_ring(cls, model: StructureModel) -> "AnchorSet":
        _, top = model.end_levels()
        return cls(frozenset(top))

    @classmethod
    def base_ring(cls, model: StructureModel) -> "AnchorSet":
        base, _ = model.end_levels()
        return cls(frozenset(base))

    def validate(self, model: StructureModel):
        if not self.fixed:
            raise ParameterError("anchor set is empty")
        unknown = [nd for nd in self.fixed if nd not in model._index]
        if unknown:
            raise ParameterError(f"anchor nodes not in model: "
                                 f"{[n.label() for n in unknown]}")

    def validate_platform(self, model: StructureModel):
        """Platform anchoring additionally needs a non-degenerate plane."""
        self.validate(model)
        pts = np.array([model.seed_coords[model.node_index(nd)]
                        for nd in self.fixed])
        centered = pts - pts.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
            raise ParameterError("anchor nodes do not span a plane")

    def mask(self, model: StructureModel) -> np.ndarray:
        mask = np.zeros(model.node_count, dtype=bool)
        for nd in self.fixed:
            mask[model.node_index(nd)] = True
        return mask


@dataclass
class EquilibriumState:
    """Solved configuration: node coordinates plus signed member forces."""

    nodes: list[NodeId]
    coords: np.ndarray
    members: list[Member]
    member_forces: np.ndarray
    prestress_scale: float = 1.0
    residual: float = 0.0
    residual_rel: float = 0.0
    converged: bool = True

    @property
    def positions(self) -> dict[NodeId, np.ndarray]:
        return {nd: self.coords[i] for i, nd in enumerate(self.nodes)}

    @property
    def forces(self) -> dict[Member, float]:
        return {mb: float(self.member_forces[i])
                for i, mb in enumerate(self.members)}

    def copy(self) -> "EquilibriumState":
        return EquilibriumState(self.nodes, self.coords.copy(), self.members,
                                self.member_forces.copy(), self.prestress_scale,
                                self.residual, self.residual_rel, self.converged)

    def tip(self, model: StructureModel, anchors: "AnchorSet") -> np.ndarray:
        """Centroid of the free end ring (the end with no anchored node)."""
        base, top = model.end_levels()
        free_ring = base if all(nd not in anchors.fixed for nd in base) else top
        idxs = [model.node_index(nd) for nd in free_ring]
        return self.coords[idxs].mean(axis=0)


def _loads_array(model: StructureModel, loads) -> np.ndarray:
    arr = np.zeros((model.node_count, 3))
    if loads:
        for nd, vec in loads.items():
            arr[model.node_index(nd)] = np.asarray(vec, dtype=float)
    return arr


def _density_matrix(model: StructureModel, qarr: np.ndarray) -> np.ndarray:
    n = model.node_count
    D = np.zeros((n, n))
    pairs = model.member_index_pairs()
    for (ia, ib), qv in zip(pairs, qarr):
        D[ia, ia] += qv
        D[ib, ib] += qv
        D[ia, ib] -= qv
        D[ib, ia] -= qv
    return D


def solve_force_density(model: StructureModel, q: ForceDensitySet,
                        anchors: AnchorSet, loads=None) -> EquilibriumState:
    """Solve linear node equilibrium sum_j q_ij (x_j - x_i) + p_i = 0.

    Anchored coordinates come from the model seed.  Raises SolvabilityError
    when the free-free block is singular, naming the nodes involved.
    """
    q.validate(model)
    anchors.validate(model)
    qarr = q.as_array(model)
    D = _density_matrix(model, qarr)
    fixed = anchors.mask(model)
    free = ~fixed
    free_nodes = [nd for nd in model.nodes if not fixed[model.node_index(nd)]]

    zero_rows = [nd for nd in free_nodes
                 if np.abs(D[model.node_index(nd)]).max() < 1e-30]
    if zero_rows:
        raise SolvabilityError(
            "free nodes with no effective stiffness: "
            + ", ".join(nd.label() for nd in zero_rows), nodes=zero_rows)

    loads_arr = _loads_array(model, loads)
    Dff = D[np.ix_(free, free)]
    Dfa = D[np.ix_(free, fixed)]
    rhs = loads_arr[free] - Dfa @ model.seed_coords[fixed]

    sv = np.linalg.svd(Dff, compute_uv=False)
    if sv[0] <= 0 or sv[-1] / sv[0] < 1e-12:
        _, _, vt = np.linalg.svd(Dff)
        weights = np.abs(vt[-1])
        worst = np.argsort(weights)[::-1][:4]
        bad = [free_nodes[i] for i in worst]
        raise SolvabilityError(
            "singular equilibrium system (under-anchored or self-stress "
            "direction); dominant nodes: "
            + ", ".join(nd.label() for nd in bad), nodes=bad)

    coords = model.seed_coords.copy()
    coords[free] = np.linalg.solve(Dff, rhs)

    imbalance = -(D @ coords) + loads_arr
    residual = float(np.abs(imbalance[free]).max()) if free.any() else 0.0

    pairs = model.member_index_pairs()
    lengths = np.linalg.norm(coords[pairs[:, 1]] - coords[pairs[:, 0]], axis=1)
    forces = qarr * lengths

    load_scale = float(np.abs(loads_arr).max())
    force_scale = max(1.0, load_scale, float(np.abs(forces).max()))
    return EquilibriumState(
        nodes=list(model.nodes), coords=coords, members=list(model.members),
        member_forces=forces, prestress_scale=1.0, residual=residual,
        residual_rel=residual / force_scale, converged=True)


@dataclass
class AdaptResult:
    """Outcome of adapt_force_densities."""

    q: ForceDensitySet
    converged: bool
    iterations: int
    max_error: float
    trace: list = field(default_factory=list)


def adapt_force_densities(model: StructureModel, q0: ForceDensitySet,
                          anchors: AnchorSet, length_targets=None,
                          force_targets=None, loads=None,
                          tol: float = 1e-10, max_iter: int = 200,
                          step_cap: float = 2.0) -> AdaptResult:
    """Multiplicative fixed-point retargeting of member lengths or forces.

    Per iteration each length-targeted member applies
    q *= achieved_length / target_length (a member too long needs a denser
    pull), and each force-targeted member applies q *= target / achieved.
    Update ratios are capped to [1/step_cap, step_cap].
    """
    length_targets = dict(length_targets or {})
    force_targets = dict(force_targets or {})
    if tol <= 0:
        raise ParameterError("tol must be positive")
    overlap = set(length_targets) & set(force_targets)
    if overlap:
        raise ParameterError("members cannot carry both length and force targets")
    for mb, value in list(length_targets.items()):
        if value <= 0:
            raise DivergenceError(
                f"infeasible target: non-positive length {value} for "
                f"{mb.kind} member", trace=[])
    for mb in list(length_targets) + list(force_targets):
        if mb not in q0.q:
            raise ParameterError(f"target references unknown member {mb.kind}")

    q = dict(q0.q)
    trace = []
    state = solve_force_density(model, ForceDensitySet(q), anchors, loads)
    for iteration in range(max_iter + 1):
        pairs = {mb: i for i, mb in enumerate(state.members)}
        coords = state.coords
        errors = []
        updates = {}
        for mb, target in length_targets.items():
            a, b = mb.endpoints
            achieved = float(np.linalg.norm(
                coords[model.node_index(b)] - coords[model.node_index(a)]))
            errors.append(abs(achieved - target) / max(1.0, abs(target)))
            updates[mb] = achieved / target
        for mb, target in force_targets.items():
            i = pairs[mb]
            achieved = float(state.member_forces[i])
            errors.append(abs(achieved - target) / max(1.0, abs(target)))
            if achieved * target <= 0:
                raise DivergenceError(
                    f"force target {target} unreachable from achieved "
                    f"{achieved} (sign change)", trace=trace)
            updates[mb] = target / achieved
        max_error = max(errors) if errors else 0.0
        trace.append({"iteration": iteration, "max_error": max_error})
        if max_error <= tol:
            return AdaptResult(ForceDensitySet(q), True, iteration, max_error,
                               trace)
        if iteration == max_iter:
            break
        for mb, ratio in updates.items():
            q[mb] *= float(np.clip(ratio, 1.0 / step_cap, step_cap))
        if max(abs(v) for v in q.values()) > 1e12:
            raise DivergenceError("force densities diverged beyond 1e12",
                                  trace=trace)
        state = solve_force_density(model, ForceDensitySet(q), anchors, loads)
    return AdaptResult(ForceDensitySet(q), False, max_iter, max_error, trace)
