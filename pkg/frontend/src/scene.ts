/**
 * Pure scene construction: wire state -> renderable description.
 *
 * One builder serves both data paths (live state_update stream and the
 * /model snapshot after a reconnect), which is what guarantees the console
 * cannot drift from the physics: there is no client-side simulation state,
 * only this projection.
 */

import {
  ModelSnapshot,
  StateUpdatePayload,
} from "./protocol.js";

export interface SceneLine {
  kind: string;
  a: [number, number, number];
  b: [number, number, number];
  force: number;
  slack: boolean;
  color: string;
}

export interface SceneDescription {
  lines: SceneLine[];
  tip: [number, number, number];
  nodePositions: [number, number, number][];
}

export const SLACK_COLOR = "#8a8a8a";
export const STRUT_COLOR = "#6a3fb5";
const SLACK_EPS = 1e-12;

/** Cable color ramps with tension from pale amber to saturated red. */
export function cableColor(force: number, maxForce: number): string {
  if (force <= SLACK_EPS) {
    return SLACK_COLOR;
  }
  const t = Math.min(force / Math.max(maxForce, 1e-9), 1.0);
  const red = 230;
  const green = Math.round(200 - 170 * t);
  const blue = Math.round(60 * (1 - t));
  return `#${((red << 16) | (green << 8) | blue).toString(16).padStart(6, "0")}`;
}

function nodeKey(id: readonly [string, number, number]): string {
  return `${id[0]}:${id[1]}:${id[2]}`;
}

/** Member endpoint indices resolved once from the model snapshot. */
export function memberIndexPairs(model: ModelSnapshot): [number, number][] {
  const index = new Map<string, number>();
  model.nodes.forEach((nd, i) => index.set(nodeKey(nd), i));
  return model.members.map((mb) => {
    const a = index.get(nodeKey(mb.a));
    const b = index.get(nodeKey(mb.b));
    if (a === undefined || b === undefined) {
      throw new Error(`member references unknown node ${mb.a} / ${mb.b}`);
    }
    return [a, b];
  });
}

export function buildScene(
  pairs: [number, number][],
  kinds: string[],
  positions: number[][],
  forces: number[],
  tip: [number, number, number],
): SceneDescription {
  const maxCable = Math.max(
    ...forces.filter((_, i) => kinds[i] !== "strut"), 0);
  const lines: SceneLine[] = pairs.map(([a, b], i) => {
    const kind = kinds[i];
    const force = forces[i];
    const slack = kind !== "strut" && force <= SLACK_EPS;
    return {
      kind,
      a: positions[a] as [number, number, number],
      b: positions[b] as [number, number, number],
      force,
      slack,
      color: kind === "strut" ? STRUT_COLOR : cableColor(force, maxCable),
    };
  });
  return {
    lines,
    tip,
    nodePositions: positions as [number, number, number][],
  };
}

export function sceneFromUpdate(
  model: ModelSnapshot,
  update: StateUpdatePayload,
): SceneDescription {
  return buildScene(
    memberIndexPairs(model),
    update.member_kinds,
    update.positions,
    update.member_forces,
    update.tip as [number, number, number],
  );
}

/** Reconnect path: rebuild the identical scene from the snapshot alone. */
export function sceneFromSnapshot(model: ModelSnapshot): SceneDescription {
  if (!model.state) {
    throw new Error("snapshot carries no state");
  }
  const coords = model.state.coords;
  const tipRing = tipIndices(model);
  const tip: [number, number, number] = [0, 1, 2].map((k) =>
    tipRing.reduce((s, i) => s + coords[i][k], 0) / tipRing.length,
  ) as [number, number, number];
  return buildScene(
    memberIndexPairs(model),
    model.members.map((mb) => mb.kind),
    coords,
    model.state.member_forces,
    tip,
  );
}

/** Free-end ring: the end level with no anchored node. */
function tipIndices(model: ModelSnapshot): number[] {
  const anchored = new Set(
    ((model.rig?.anchors as [string, number, number][]) ?? []).map(nodeKey));
  const levelOf = (nd: readonly [string, number, number]) =>
    nd[0] === "A" ? nd[2] : nd[2] + 1;
  const maxLevel = Math.max(...model.nodes.map(levelOf));
  const ring = (level: number) =>
    model.nodes
      .map((nd, i) => ({ nd, i }))
      .filter(({ nd }) => levelOf(nd) === level);
  const base = ring(0);
  const top = ring(maxLevel);
  const baseAnchored = base.some(({ nd }) => anchored.has(nodeKey(nd)));
  return (baseAnchored ? top : base).map(({ i }) => i);
}

/** Rolling tip trace with a bounded length, appended per rendered state. */
export class TipTrace {
  points: [number, number, number][] = [];

  constructor(readonly capacity = 600) {}

  append(tip: [number, number, number]): void {
    this.points.push([tip[0], tip[1], tip[2]]);
    if (this.points.length > this.capacity) {
      this.points.shift();
    }
  }

  clear(): void {
    this.points = [];
  }
}

/** Strain sparkline ring buffer (one per tendon). */
export class StrainHistory {
  readonly series: number[][] = [[], [], []];

  constructor(readonly capacity = 240) {}

  append(strains: number[]): void {
    strains.forEach((s, i) => {
      this.series[i].push(s);
      if (this.series[i].length > this.capacity) {
        this.series[i].shift();
      }
    });
  }
}
