/**
 * Command panel logic, DOM-free.
 *
 * Stiffness toggles, waypoint clicks, and obstacle edits each emit exactly
 * one command message immediately.  Tendon slider motion is coalesced: any
 * number of slider events within one tick flush as a single delta_l command,
 * so drags cannot flood the simulation loop.
 */

import { CommandPayload } from "./protocol.js";
import { SessionClient } from "./session.js";

export class CommandPanel {
  sliders: [number, number, number] = [0, 0, 0];
  stiffness: "high" | "low" = "high";
  lastClamped = false;
  private sliderDirty = false;

  constructor(
    private client: SessionClient,
    readonly strokeLimit: number,
  ) {}

  /** Slider motion: clamp to the stroke box, coalesce until the next tick. */
  setSlider(index: 0 | 1 | 2, value: number): void {
    const clamped = Math.max(-this.strokeLimit,
                             Math.min(this.strokeLimit, value));
    this.lastClamped = clamped !== value;
    this.sliders[index] = clamped;
    this.sliderDirty = true;
  }

  /** Flush coalesced slider state; at most one message per tick. */
  tick() {
    if (!this.sliderDirty) {
      return null;
    }
    this.sliderDirty = false;
    return this.client.sendCommand({ delta_l: [...this.sliders] });
  }

  toggleStiffness() {
    this.stiffness = this.stiffness === "high" ? "low" : "high";
    return this.client.sendCommand({ stiffness: this.stiffness });
  }

  setWaypoint(point: [number, number, number]) {
    return this.client.sendCommand({ waypoint: point });
  }

  addSphereObstacle(center: [number, number, number], radius: number,
                    thermal = 0.0) {
    const payload: CommandPayload = {
      obstacle: { op: "add", shape: "sphere", center, radius, thermal },
    };
    return this.client.sendCommand(payload);
  }

  clearObstacles() {
    return this.client.sendCommand({ obstacle: { op: "clear" } });
  }

  requestMetrics() {
    return this.client.sendCommand({ action: "metrics" });
  }
}
