/**
 * Session protocol types and validation.
 *
 * Mirrors the service wire format exactly: every message is
 * {kind, seq, payload} with seq strictly increasing per direction.  Outbound
 * messages are validated before send so a buggy panel can never emit a
 * malformed command.
 */

import { z } from "zod";

const vec3 = z.array(z.number()).length(3);

export const sensorSchema = z.object({
  distance: z.number().nullable(),
  thermal: z.number(),
  hit: z.boolean(),
  timestamp: z.number(),
});

export const controllerSchema = z.object({
  active: z.boolean(),
  waypoint_index: z.number().int(),
  waypoints: z.array(vec3),
  error_norm: z.number().nullable(),
});

export const stateUpdatePayloadSchema = z.object({
  tick: z.number().int(),
  time: z.number(),
  tip: vec3,
  positions: z.array(vec3),
  member_forces: z.array(z.number()),
  member_kinds: z.array(z.string()),
  strains: z.array(z.number()).length(3),
  delta_l: z.array(z.number()).length(3),
  stiffness_scale: z.number(),
  residual: z.number(),
  converged: z.boolean(),
  sensor: sensorSchema.nullable(),
  controller: controllerSchema.nullable(),
  applied_seq: z.number().int().nullable(),
});

export const inboundSchema = z.discriminatedUnion("kind", [
  z.object({
    kind: z.literal("state_update"),
    seq: z.number().int().positive(),
    payload: stateUpdatePayloadSchema,
  }),
  z.object({
    kind: z.literal("sensor"),
    seq: z.number().int().positive(),
    payload: z.object({
      distance: z.number().nullable(),
      thermal: z.number(),
      timestamp: z.number(),
    }),
  }),
  z.object({
    kind: z.literal("metrics"),
    seq: z.number().int().positive(),
    payload: z.record(z.unknown()),
  }),
  z.object({
    kind: z.literal("error"),
    seq: z.number().int().positive(),
    payload: z.object({
      message: z.string(),
      echo_seq: z.number().int().nullable(),
    }),
  }),
]);

export const obstacleSchema = z.union([
  z.object({
    op: z.literal("add"),
    shape: z.literal("sphere"),
    center: vec3,
    radius: z.number().positive(),
    thermal: z.number().optional(),
  }),
  z.object({ op: z.literal("clear") }),
]);

export const commandPayloadSchema = z
  .object({
    delta_l: z.array(z.number()).length(3).optional(),
    stiffness: z.union([z.enum(["high", "low"]), z.number().positive()])
      .optional(),
    waypoint: vec3.optional(),
    obstacle: obstacleSchema.optional(),
    action: z.literal("metrics").optional(),
  })
  .refine((p) => Object.keys(p).length > 0, {
    message: "command payload must carry at least one field",
  });

export const outboundSchema = z.object({
  kind: z.literal("command"),
  seq: z.number().int().positive(),
  payload: commandPayloadSchema,
});

export type SensorReading = z.infer<typeof sensorSchema>;
export type StateUpdatePayload = z.infer<typeof stateUpdatePayloadSchema>;
export type InboundMessage = z.infer<typeof inboundSchema>;
export type CommandPayload = z.infer<typeof commandPayloadSchema>;
export type OutboundMessage = z.infer<typeof outboundSchema>;

/** Parse one wire line; returns null for anything malformed. */
export function parseInbound(text: string): InboundMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  const result = inboundSchema.safeParse(raw);
  return result.success ? result.data : null;
}

/** Validate and serialize an outbound message; throws on schema violation. */
export function encodeOutbound(message: OutboundMessage): string {
  return JSON.stringify(outboundSchema.parse(message));
}

// --- model snapshot (GET /model) -------------------------------------------
const nodeIdSchema = z.tuple([z.string(), z.number().int(), z.number().int()]);

export const modelSnapshotSchema = z.object({
  format_version: z.literal(1),
  params: z.object({
    n: z.number().int(),
    m: z.number().int(),
    unit_height: z.number(),
    base_radius: z.number(),
    twist: z.number(),
  }),
  materials: z.object({ stroke_limit: z.number() }).passthrough(),
  nodes: z.array(nodeIdSchema),
  members: z.array(
    z.object({
      kind: z.string(),
      a: nodeIdSchema,
      b: nodeIdSchema,
    }).passthrough(),
  ),
  rig: z
    .object({ tendon_paths: z.array(z.array(z.number().int())) })
    .passthrough()
    .nullable(),
  state: z
    .object({
      coords: z.array(vec3),
      member_forces: z.array(z.number()),
    })
    .passthrough()
    .nullable(),
});

export type ModelSnapshot = z.infer<typeof modelSnapshotSchema>;

export function parseModelSnapshot(doc: unknown): ModelSnapshot {
  return modelSnapshotSchema.parse(doc);
}
