"""Model files, CSV/OBJ exports, and actuation scripts.

Model files are versioned JSON; floats round-trip exactly through repr.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .analysis import ConfigurationMap, ExplorationLog
from .dynamics import ActuationCommand, Rig
from .errors import DanglingReferenceError, SchemaError, VersionError
from .fdm import AnchorSet, EquilibriumState, ForceDensitySet
from .materials import Materials
from .topology import (Member, NodeId, StructureModel, TopologyParams,
                       validate_topology)

FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    """Everything a model file can carry."""

    model: StructureModel
    materials: Materials
    q: ForceDensitySet | None = None
    rig: Rig | None = None
    state: EquilibriumState | None = None


def _node_to_json(nd: NodeId):
    return [nd.family, nd.index, nd.layer]


def _node_from_json(raw) -> NodeId:
    if (not isinstance(raw, (list, tuple)) or len(raw) != 3
            or raw[0] not in ("A", "B")):
        raise SchemaError(f"malformed node id {raw!r}")
    return NodeId(str(raw[0]), int(raw[1]), int(raw[2]))


def model_document(model: StructureModel, materials: Materials,
                   q: ForceDensitySet | None = None, rig: Rig | None = None,
                   state: EquilibriumState | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "params": {
            "n": model.params.n,
            "m": model.params.m,
            "unit_height": model.params.unit_height,
            "base_radius": model.params.base_radius,
            "twist": model.params.twist,
        },
        "materials": {
            "cable_stiffness": materials.cable_stiffness,
            "strut_stiffness": materials.strut_stiffness,
            "tendon_stiffness": materials.tendon_stiffness,
            "node_mass": materials.node_mass,
            "winder_radius": materials.winder_radius,
            "tendon_pitch": materials.tendon_pitch,
            "stroke_limit": materials.stroke_limit,
            "prestress_stretch": materials.prestress_stretch,
            "prestress_high": materials.prestress_high,
            "prestress_low": materials.prestress_low,
            "max_tension": materials.max_tension,
        },
        "nodes": [_node_to_json(nd) for nd in model.nodes],
        "seed_coords": model.seed_coords.tolist(),
        "members": [{
            "kind": mb.kind,
            "a": _node_to_json(mb.endpoints[0]),
            "b": _node_to_json(mb.endpoints[1]),
            "rest_length": mb.rest_length,
        } for mb in model.members],
        "force_densities": (q.as_array(model).tolist() if q else None),
        "rig": None,
        "state": None,
    }
    if rig is not None:
        doc["rig"] = {
            "anchors": [_node_to_json(nd) for nd in sorted(rig.anchors.fixed)],
            "rest_coords": rig.rest_coords.tolist(),
            "rest_forces": rig.rest_forces.tolist(),
            "brace_pairs": rig.brace_pairs.tolist(),
            "brace_forces": rig.brace_forces.tolist(),
            "tendon_paths": [p.tolist() for p in rig.tendon_paths],
            "formfind_converged": rig.formfind_converged,
        }
    if state is not None:
        doc["state"] = {
            "coords": state.coords.tolist(),
            "member_forces": state.member_forces.tolist(),
            "prestress_scale": state.prestress_scale,
            "residual": state.residual,
            "residual_rel": state.residual_rel,
            "converged": state.converged,
        }
    return doc


def save_model(path, model: StructureModel, materials: Materials,
               q: ForceDensitySet | None = None, rig: Rig | None = None,
               state: EquilibriumState | None = None):
    doc = model_document(model, materials, q=q, rig=rig, state=state)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def _require(doc, key, kind):
    if key not in doc:
        raise SchemaError(f"missing required key {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"key {key!r} has type {type(value).__name__}")
    return value


def load_model(path) -> ModelBundle:
    """Load and fully validate a model file; never returns a partial model."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise VersionError("file carries no format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionError(
            f"unsupported format_version {doc['format_version']!r} "
            f"(expected {FORMAT_VERSION})")

    raw_params = _require(doc, "params", dict)
    try:
        params = TopologyParams(
            n=raw_params["n"], m=raw_params["m"],
            unit_height=raw_params["unit_height"],
            base_radius=raw_params["base_radius"],
            twist=raw_params["twist"])
    except KeyError as exc:
        raise SchemaError(f"params section misses {exc}") from exc

    raw_mat = _require(doc, "materials", dict)
    try:
        materials = Materials(**raw_mat)
    except TypeError as exc:
        raise SchemaError(f"materials section malformed: {exc}") from exc

    nodes = [_node_from_json(nd) for nd in _require(doc, "nodes", list)]
    node_set = set(nodes)
    seed = np.asarray(_require(doc, "seed_coords", list), dtype=float)
    if seed.shape != (len(nodes), 3):
        raise SchemaError(f"seed_coords shape {seed.shape} does not match "
                          f"{len(nodes)} nodes")

    members = []
    for raw in _require(doc, "members", list):
        a = _node_from_json(raw["a"])
        b = _node_from_json(raw["b"])
        for nd in (a, b):
            if nd not in node_set:
                raise DanglingReferenceError(
                    f"member references unknown node {nd.label()}")
        members.append(Member(raw["kind"], (a, b),
                              rest_length=raw.get("rest_length")))

    model = StructureModel(params, nodes, seed, members)
    report = validate_topology(model)
    if not report.ok:
        raise SchemaError("structural invariants violated: "
                          + "; ".join(report.violations))

    q = None
    if doc.get("force_densities") is not None:
        qarr = doc["force_densities"]
        if len(qarr) != len(members):
            raise SchemaError("force_densities length mismatch")
        q = ForceDensitySet({mb: float(v) for mb, v in zip(members, qarr)})
        q.validate(model)

    rig = None
    if doc.get("rig") is not None:
        raw_rig = doc["rig"]
        anchors = AnchorSet(frozenset(
            _node_from_json(nd) for nd in raw_rig["anchors"]))
        for nd in anchors.fixed:
            if nd not in node_set:
                raise DanglingReferenceError(
                    f"anchor references unknown node {nd.label()}")
        rest_coords = np.asarray(raw_rig["rest_coords"], dtype=float)
        rest_forces = np.asarray(raw_rig["rest_forces"], dtype=float)
        if rest_coords.shape != (len(nodes), 3):
            raise SchemaError("rig rest_coords shape mismatch")
        if rest_forces.shape != (len(members),):
            raise SchemaError("rig rest_forces length mismatch")
        brace_pairs = np.asarray(raw_rig["brace_pairs"], np.int64)
        if brace_pairs.size == 0:
            brace_pairs = brace_pairs.reshape(0, 2)
        brace_forces = None
        if raw_rig.get("brace_forces") is not None:
            brace_forces = np.asarray(raw_rig["brace_forces"], dtype=float)
            if brace_forces.shape != (len(brace_pairs),):
                raise SchemaError("rig brace_forces length mismatch")
        rig = Rig(model=model, materials=materials, anchors=anchors,
                  rest_coords=rest_coords, rest_forces=rest_forces,
                  brace_pairs=brace_pairs,
                  tendon_paths=[np.asarray(p, np.int64)
                                for p in raw_rig["tendon_paths"]],
                  brace_forces=brace_forces,
                  formfind_converged=bool(raw_rig["formfind_converged"]))

    state = None
    if doc.get("state") is not None:
        raw_state = doc["state"]
        coords = np.asarray(raw_state["coords"], dtype=float)
        forces = np.asarray(raw_state["member_forces"], dtype=float)
        if coords.shape != (len(nodes), 3) or forces.shape != (len(members),):
            raise SchemaError("state arrays do not match the model")
        state = EquilibriumState(
            nodes=list(nodes), coords=coords, members=list(members),
            member_forces=forces,
            prestress_scale=float(raw_state["prestress_scale"]),
            residual=float(raw_state["residual"]),
            residual_rel=float(raw_state.get("residual_rel", 0.0)),
            converged=bool(raw_state["converged"]))

    return ModelBundle(model=model, materials=materials, q=q, rig=rig,
                       state=state)


# --- CSV ------------------------------------------------------------------
TRAJECTORY_HEADER = ["t", "tip_x", "tip_y", "tip_z", "dl1", "dl2", "dl3",
                     "theta1", "theta2", "theta3", "eps1", "eps2", "eps3",
                     "stiffness", "residual"]


def fmt(value) -> str:
    """Full-precision, round-trip-safe float formatting for CSV cells."""
    return repr(float(value))


def write_trajectory_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        writer.writerows(rows)
    return path


def write_metrics_csv(path, metrics_list):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stiffness_level", "accessible_distance",
                         "working_radius", "reach_angle", "axial_excursion",
                         "samples", "converged", "valid"])
        for wm in metrics_list:
            writer.writerow([wm.stiffness_level, fmt(wm.accessible_distance),
                             fmt(wm.working_radius), fmt(wm.reach_angle),
                             fmt(wm.axial_excursion),
                             wm.samples, wm.converged, wm.valid])
    return path


def write_strain_csv(path, samples):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "eps1", "eps2", "eps3",
                         "tip_x", "tip_y", "tip_z", "converged",
                         "dl1", "dl2", "dl3"])
        for s in samples:
            writer.writerow([fmt(s.alpha), fmt(s.beta),
                             *[fmt(e) for e in s.strains],
                             *[fmt(t) for t in s.tip], s.converged,
                             *[fmt(d) for d in s.delta_l]])
    return path


# --- OBJ --------------------------------------------------------------------
def export_obj(path, model: StructureModel, coords):
    """Line-element OBJ: one group per cable kind plus struts."""
    coords = np.asarray(coords, dtype=float)
    lines = ["# tenspine line-element export"]
    for xyz in coords:
        lines.append("v {} {} {}".format(*(repr(float(c)) for c in xyz)))
    by_kind: dict[str, list[Member]] = {}
    for mb in model.members:
        by_kind.setdefault(mb.kind, []).append(mb)
    for kind in sorted(by_kind):
        group = "struts" if kind == "strut" else f"cables_{kind}"
        lines.append(f"g {group}")
        for mb in by_kind[kind]:
            a = model.node_index(mb.endpoints[0]) + 1
            b = model.node_index(mb.endpoints[1]) + 1
            lines.append(f"l {a} {b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# --- actuation scripts ------------------------------------------------------
def save_script(path, entries, ticks=None):
    """Actuation script: tick count plus {tick, delta_l, stiffness} commands."""
    entries = sorted(entries, key=lambda e: e[0])
    if ticks is None:
        ticks = entries[-1][0] + 1 if entries else 0
    doc = {
        "ticks": int(ticks),
        "commands": [{"tick": int(t),
                      "delta_l": list(map(float, cmd.delta_l)),
                      "stiffness": cmd.stiffness}
                     for t, cmd in entries],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def load_script(path):
    """Returns (ticks, [(tick, ActuationCommand), ...]) sorted by tick."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"script is not valid JSON: {exc}") from exc
    if isinstance(doc, list):  # bare command list: tick count inferred
        raw_commands = doc
        ticks = None
    elif isinstance(doc, dict) and "commands" in doc:
        raw_commands = doc["commands"]
        ticks = doc.get("ticks")
    else:
        raise SchemaError("script must be a command array or "
                          "{ticks, commands} object")
    entries = []
    for raw in raw_commands:
        try:
            command = ActuationCommand(delta_l=tuple(raw["delta_l"]),
                                       stiffness=raw.get("stiffness", "high"))
            entries.append((int(raw["tick"]), command))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed script entry {raw!r}") from exc
    entries.sort(key=lambda e: e[0])
    if ticks is None:
        ticks = entries[-1][0] + 1 if entries else 0
    return int(ticks), entries


# --- configuration map / exploration log -------------------------------------
def configuration_map_to_json(cmap: ConfigurationMap) -> dict:
    return {
        "cell_size": cmap.cell_size,
        "safety_threshold": cmap.safety_threshold,
        "cells": [{"ijk": list(key), "status": info["status"],
                   "entries": info["entries"]}
                  for key, info in sorted(cmap.cells.items())],
    }


def save_configuration_map(path, cmap: ConfigurationMap):
    with open(path, "w") as fh:
        json.dump(configuration_map_to_json(cmap), fh, indent=1)
    return path


def save_exploration_log(path, log: ExplorationLog):
    doc = []
    for e in log.entries:
        sensor = None
        if e.sensor is not None:
            sensor = {"distance": e.sensor.distance, "thermal": e.sensor.thermal,
                      "timestamp": e.sensor.timestamp, "hit": e.sensor.hit}
        doc.append({"timestamp": e.timestamp, "alpha": e.alpha, "beta": e.beta,
                    "delta_l": list(e.delta_l), "stiffness": e.stiffness,
                    "sensor": sensor, "tip": list(e.tip),
                    "distance_to_trajectory": e.distance_to_trajectory,
                    "converged": e.converged})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path
