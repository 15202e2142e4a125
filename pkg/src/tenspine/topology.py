"""Parametric multi-layer prismatic tensegrity generator.

The structure is a stack of twisted prism units sharing interleaved rings:
n-gon rings at both ends, 2n-gon rings at every middle level.  Nodes carry
two-family names (A/B): ``A i j`` sits on level ``j``, ``B i j`` on level
``j + 1``.  Four cable classes (horizontal, saddle, vertical, diagonal) plus
one strut class connect them; member counts follow closed formulas in n and m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TopologyError

CABLE_KINDS = ("horizontal", "saddle", "vertical", "diagonal")
MEMBER_KINDS = CABLE_KINDS + ("strut",)

_KIND_RANK = {k: i for i, k in enumerate(MEMBER_KINDS)}


def cable_count_formulas(n: int, m: int) -> dict[str, int]:
    """Expected member count per kind for an (n, m) structure."""
    return {
        "horizontal": 2 * n,
        "saddle": 2 * n * (m - 2),
        "vertical": n * (m - 1),
        "diagonal": n * (m - 1),
        "strut": n * (m - 1),
    }


@dataclass(frozen=True, order=True)
class NodeId:
    """Named vertex: family A or B, circumferential index, family layer ordinal."""

    family: str
    index: int
    layer: int

    @property
    def level(self) -> int:
        """Ring level (height ordinal) this node sits on."""
        return self.layer if self.family == "A" else self.layer + 1

    def label(self) -> str:
        return f"{self.family}{self.index}-{self.layer}"


@dataclass(frozen=True)
class Member:
    """Undirected structural member; endpoints stored in canonical order."""

    kind: str
    endpoints: tuple[NodeId, NodeId]
    rest_length: float | None = None

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise TopologyError(f"degenerate member with equal endpoints {a.label()}")
        if self.kind not in MEMBER_KINDS:
            raise TopologyError(f"unknown member kind {self.kind!r}")
        if b < a:
            object.__setattr__(self, "endpoints", (b, a))

    @property
    def is_cable(self) -> bool:
        return self.kind != "strut"

    def key(self) -> tuple:
        a, b = self.endpoints
        return (self.kind, a, b)


@dataclass(frozen=True)
class TopologyParams:
    """Generation parameters.

    n: polygon order (odd, >= 3); m: layer count (3p + 3); unit_height: level
    spacing; base_radius: ring circumradius; twist: per-level rotation of the
    A-family grid (defaults to pi/n).
    """

    n: int = 3
    m: int = 6
    unit_height: float = 80.0
    base_radius: float = 60.0
    twist: float | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 3:
            raise TopologyError(f"polygon order n must be an integer >= 3, got {self.n}")
        if self.n % 2 == 0:
            raise TopologyError(f"polygon order n must be odd, got {self.n}")
        if not isinstance(self.m, int) or self.m < 3 or self.m % 3 != 0:
            raise TopologyError(
                f"layer count m must be 3p+3 (3, 6, 9, ...), got {self.m}"
            )
        if self.unit_height <= 0:
            raise TopologyError(f"unit_height must be positive, got {self.unit_height}")
        if self.base_radius <= 0:
            raise TopologyError(f"base_radius must be positive, got {self.base_radius}")
        if self.twist is None:
            object.__setattr__(self, "twist", math.pi / self.n)

    @property
    def levels(self) -> int:
        return self.m

    @property
    def p(self) -> int:
        return self.m // 3 - 1


@dataclass
class ValidationReport:
    """Outcome of validate_topology; empty ``violations`` means well-formed."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str):
        self.violations.append(message)


@dataclass
class StructureModel:
    """Generated structure: parameters, named nodes with seed coordinates, members."""

    params: TopologyParams
    nodes: list[NodeId]
    seed_coords: np.ndarray
    members: list[Member]

    def __post_init__(self):
        self._index = {nd: i for i, nd in enumerate(self.nodes)}

    def node_index(self, node: NodeId) -> int:
        return self._index[node]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def members_of_kind(self, kind: str) -> list[Member]:
        return [mb for mb in self.members if mb.kind == kind]

    def member_index_pairs(self) -> np.ndarray:
        """(n_members, 2) array of node indices, in member order."""
        return np.array(
            [[self._index[a], self._index[b]] for mb in self.members
             for a, b in [mb.endpoints]],
            dtype=np.int64,
        )

    def level_of(self, node: NodeId) -> int:
        return node.level

    def level_rings(self) -> list[list[NodeId]]:
        """Nodes of each level in circumferential ring order.

        End levels are n-gons of a single family; middle levels interleave
        A (level ordinal) and B (ordinal - 1) into a 2n-gon, matching the
        saddle-cable ring.
        """
        n, m = self.params.n, self.params.m
        rings: list[list[NodeId]] = []
        rings.append([NodeId("A", i, 0) for i in range(n)])
        for lv in range(1, m - 1):
            ring = []
            for i in range(n):
                ring.append(NodeId("A", i, lv))
                ring.append(NodeId("B", i, lv - 1))
            rings.append(ring)
        rings.append([NodeId("B", i, m - 2) for i in range(n)])
        return rings

    def end_levels(self) -> tuple[list[NodeId], list[NodeId]]:
        """(base ring, top ring) node lists."""
        rings = self.level_rings()
        return rings[0], rings[-1]

    def with_rest_lengths(self, rest: dict[Member, float]) -> "StructureModel":
        new_members = [replace(mb, rest_length=rest.get(mb, mb.rest_length))
                       for mb in self.members]
        return StructureModel(self.params, self.nodes, self.seed_coords.copy(),
                              new_members)


def _member_sort_key(member: Member):
    a, b = member.endpoints
    return (_KIND_RANK[member.kind], min(a.level, b.level), a.index, b.index,
            a.family, b.family)


def seed_position(params: TopologyParams, node: NodeId) -> np.ndarray:
    """Seed coordinate: regular rings with uniform per-level twist."""
    n = params.n
    level = node.level
    azimuth = 2.0 * math.pi * node.index / n + level * params.twist
    if node.family == "B":
        azimuth += math.pi / n
    return np.array([
        params.base_radius * math.cos(azimuth),
        params.base_radius * math.sin(azimuth),
        level * params.unit_height,
    ])


def generate_topology(params: TopologyParams) -> StructureModel:
    """Build the full (n, m) structure in canonical member order.

    Connectivity generalises the explicit m=3 listing: saddle rings alternate
    A and B around each middle level; verticals step one index backward across
    each level gap (family A on every gap except the last, which only family B
    can span); diagonals join same-index A to B within a stage; each stage
    carries n struts crossing opposite to the diagonals, so every node touches
    exactly one strut.
    """
    n, m = params.n, params.m
    nodes = [NodeId("A", i, j) for j in range(m - 1) for i in range(n)]
    nodes += [NodeId("B", i, j) for j in range(m - 1) for i in range(n)]

    members: list[Member] = []

    def cable(kind, a, b):
        members.append(Member(kind, (a, b)))

    # horizontal: both end n-gons
    for i in range(n):
        cable("horizontal", NodeId("A", i, 0), NodeId("A", (i + 1) % n, 0))
    for i in range(n):
        cable("horizontal", NodeId("B", i, m - 2), NodeId("B", (i + 1) % n, m - 2))

    # saddle: 2n-gon ring on each middle level
    for lv in range(1, m - 1):
        for i in range(n):
            cable("saddle", NodeId("A", i, lv), NodeId("B", i, lv - 1))
            cable("saddle", NodeId("B", i, lv - 1), NodeId("A", (i + 1) % n, lv))

    # vertical: one family per level gap, index shifted -1
    for gap in range(m - 1):
        for i in range(n):
            if gap < m - 2:
                cable("vertical", NodeId("A", i, gap), NodeId("A", (i - 1) % n, gap + 1))
            else:
                cable("vertical", NodeId("B", i, gap - 1), NodeId("B", (i - 1) % n, gap))

    # diagonal: same-index A to B within each stage
    for stage in range(m - 1):
        for i in range(n):
            cable("diagonal", NodeId("A", i, stage), NodeId("B", i, stage))

    # struts: cross one index against the diagonals, one per node
    for stage in range(m - 1):
        for i in range(n):
            members.append(Member("strut",
                                  (NodeId("A", i, stage),
                                   NodeId("B", (i - 1) % n, stage))))

    members.sort(key=_member_sort_key)
    coords = np.array([seed_position(params, nd) for nd in nodes])
    return StructureModel(params, nodes, coords, members)


def validate_topology(model: StructureModel) -> ValidationReport:
    """Check every structural invariant; returns all violations found."""
    report = ValidationReport()
    n, m = model.params.n, model.params.m

    known = set(model.nodes)
    if len(known) != len(model.nodes):
        report.add("duplicate node ids present")

    counts = {k: 0 for k in MEMBER_KINDS}
    seen_edges = {}
    for mb in model.members:
        counts[mb.kind] += 1
        a, b = mb.endpoints
        for nd in (a, b):
            if nd not in known:
                report.add(f"member {mb.kind} references unknown node {nd.label()}")
        edge = (a, b)
        if edge in seen_edges:
            report.add(f"duplicate edge {a.label()}--{b.label()} "
                       f"({seen_edges[edge]} and {mb.kind})")
        else:
            seen_edges[edge] = mb.kind

    for kind, expected in cable_count_formulas(n, m).items():
        if counts[kind] != expected:
            report.add(f"{kind} count {counts[kind]} != expected {expected}")

    # connectivity over the combined cable + strut graph
    if model.nodes:
        adjacency: dict[NodeId, list[NodeId]] = {nd: [] for nd in model.nodes}
        for mb in model.members:
            a, b = mb.endpoints
            if a in adjacency and b in adjacency:
                adjacency[a].append(b)
                adjacency[b].append(a)
        seen = {model.nodes[0]}
        stack = [model.nodes[0]]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(model.nodes):
            report.add(f"graph disconnected: {len(model.nodes) - len(seen)} "
                       "nodes unreachable")

    return report
