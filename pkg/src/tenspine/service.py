"""Live-control service: one authoritative simulation loop, message-passing IO.

Protocol: line-delimited JSON SessionMessages over a WebSocket at /session
(`?role=writer` for the single operator, viewers read-only), plus a snapshot
endpoint at /model returning the full model file JSON.  Message envelope:
{"kind": ..., "seq": <monotone int>, "payload": {...}}.

Inbound (writer only): kind "command" with any of
  delta_l [3] / stiffness ("high"|"low"|scale)  -- actuation
  waypoint [x, y, z]                            -- closed-loop target
  obstacle {"op": "add"|"clear", ...}           -- environment edits
  action "metrics"                              -- request a metrics message
Outbound: "state_update" every tick, "sensor" on obstacle hits, "metrics" on
request, "error" with the offending inbound seq echoed.
"""

from __future__ import annotations

import asyncio
import contextlib
import json

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .control import (ControlGeometry, ControllerState, PoseConfig,
                      fk_constant_curvature, step_closed_loop)
from .dynamics import ActuationCommand, Rig
from .environment import BoxObstacle, Environment, SphereObstacle, WallObstacle
from .errors import ParameterError
from .modelio import model_document
from .plant import PlantSession

INBOUND_KINDS = {"command"}


def _parse_obstacle(raw: dict):
    shape = raw.get("shape", "sphere")
    thermal = float(raw.get("thermal", 0.0))
    if shape == "sphere":
        return SphereObstacle(tuple(raw["center"]), float(raw["radius"]),
                              thermal)
    if shape == "box":
        return BoxObstacle(tuple(raw["lo"]), tuple(raw["hi"]), thermal)
    if shape == "wall":
        return WallObstacle(tuple(raw["point"]), tuple(raw["normal"]), thermal)
    raise ParameterError(f"unknown obstacle shape {shape!r}")


class SessionHub:
    """Single-loop session state: plant, controller, connected clients."""

    def __init__(self, rig: Rig, env: Environment | None, substeps: int,
                 tick_hz: float, safety_threshold: float):
        self.plant = PlantSession(rig, env=env, substeps=substeps,
                                  tick_dt=1.0 / tick_hz)
        self.geometry = ControlGeometry.from_rig(rig)
        self.controller: ControllerState | None = None
        self.safety_threshold = safety_threshold
        self.clients: list[WebSocket] = []
        self.writer: WebSocket | None = None
        self.out_seq = 0
        self.applied_seq: int | None = None
        self._queued_seq: int | None = None
        # immutable post-step snapshot served by the HTTP endpoints; the tick
        # loop owns the live plant and swaps this reference between steps
        self.snapshot_state = self.plant.state()
        self.snapshot_tick = 0
        self.snapshot_log: list = []

    def next_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq

    def message(self, kind: str, payload: dict) -> str:
        return json.dumps({"kind": kind, "seq": self.next_seq(),
                           "payload": payload})

    async def broadcast(self, text: str):
        dead = []
        for ws in self.clients:
            try:
                await ws.send_text(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.drop(ws)

    def drop(self, ws: WebSocket):
        if ws in self.clients:
            self.clients.remove(ws)
        if self.writer is ws:
            self.writer = None

    # -- controller glue -------------------------------------------------------
    def controller_tick(self):
        if self.controller is None or self.controller.finished:
            return
        pose_est = fk_constant_curvature(self.plant.command, self.geometry,
                                         warn_inconsistent=False)
        achieved = PoseConfig(alpha=pose_est.alpha, beta=pose_est.beta,
                              tip=tuple(self.plant.tip()))
        command, self.controller = step_closed_loop(
            self.controller, achieved, self.plant.sensor_reading())
        if command != self.plant.command:
            self.plant.queue_command(command)

    def add_waypoint(self, waypoint):
        wp = tuple(float(v) for v in waypoint)
        if self.controller is None or self.controller.finished:
            self.controller = ControllerState(
                geometry=self.geometry, target=(wp,),
                safety_threshold=self.safety_threshold,
                stroke_limit=self.plant.rig.materials.stroke_limit,
                waypoint_tol=0.02 * self.plant.rig.model.params.base_radius,
                last_command=self.plant.command)
        else:
            self.controller = ControllerState(
                geometry=self.geometry,
                target=self.controller.target + (wp,),
                safety_threshold=self.controller.safety_threshold,
                stroke_limit=self.controller.stroke_limit,
                waypoint_tol=self.controller.waypoint_tol,
                waypoint_index=self.controller.waypoint_index,
                last_command=self.controller.last_command,
                history=self.controller.history)

    # -- payload builders --------------------------------------------------------
    def state_payload(self) -> dict:
        result = self.plant.tick_result()
        state = self.plant.state()
        sensor = None
        if result.sensor is not None:
            sensor = {"distance": result.sensor.distance,
                      "thermal": result.sensor.thermal,
                      "hit": result.sensor.hit,
                      "timestamp": result.sensor.timestamp}
        controller = None
        if self.controller is not None:
            err = (self.controller.history[-1].error_norm
                   if self.controller.history else None)
            controller = {"active": not self.controller.finished,
                          "waypoint_index": self.controller.waypoint_index,
                          "waypoints": [list(w) for w in self.controller.target],
                          "error_norm": err}
        return {
            "tick": result.tick,
            "time": result.time,
            "tip": list(result.tip),
            "positions": state.coords.tolist(),
            "member_forces": state.member_forces.tolist(),
            "member_kinds": [mb.kind for mb in self.plant.rig.model.members],
            "strains": list(result.strains),
            "delta_l": list(result.delta_l),
            "stiffness_scale": result.stiffness_scale,
            "residual": result.residual,
            "converged": result.converged,
            "sensor": sensor,
            "controller": controller,
            "applied_seq": self.applied_seq,
        }

    def metrics_payload(self) -> dict:
        state = self.plant.state()
        forces = state.member_forces
        return {
            "tick": self.plant.tick,
            "strains": list(self.plant.strains()),
            "tip": list(self.plant.tip()),
            "max_cable_force": float(max(
                (f for f, mb in zip(forces, self.plant.rig.model.members)
                 if mb.is_cable), default=0.0)),
            "min_strut_force": float(min(
                (f for f, mb in zip(forces, self.plant.rig.model.members)
                 if not mb.is_cable), default=0.0)),
            "stiffness_scale": self.plant._scale,
        }

    # -- inbound handling ---------------------------------------------------------
    def handle_command(self, seq: int, payload: dict):
        """Apply one writer command; returns an optional reply message."""
        reply = None
        if "obstacle" in payload:
            ob = payload["obstacle"]
            if ob.get("op") == "clear":
                self.plant.env.clear()
            elif ob.get("op") == "add":
                self.plant.env.add(_parse_obstacle(ob))
            else:
                raise ParameterError("obstacle op must be 'add' or 'clear'")
        if "waypoint" in payload:
            self.add_waypoint(payload["waypoint"])
        if "delta_l" in payload or "stiffness" in payload:
            delta = payload.get("delta_l", self.plant.command.delta_l)
            if len(delta) != 3:
                raise ParameterError("delta_l must have three entries")
            stiffness = payload.get("stiffness", self.plant.command.stiffness)
            command = ActuationCommand(delta_l=tuple(delta),
                                       stiffness=stiffness)
            self.plant.queue_command(command)
            self._queued_seq = seq
            # direct actuation overrides the closed loop
            if "delta_l" in payload and self.controller is not None:
                self.controller = None
        if payload.get("action") == "metrics":
            reply = self.message("metrics", self.metrics_payload())
        return reply

    def after_step(self):
        if self._queued_seq is not None:
            self.applied_seq = self._queued_seq
            self._queued_seq = None
        self.snapshot_state = self.plant.state()
        self.snapshot_tick = self.plant.tick
        self.snapshot_log = list(self.plant.applied_log)


def create_app(rig: Rig, env: Environment | None = None,
               tick_hz: float = 30.0, substeps: int = 600,
               record_path=None, safety_threshold: float = 50.0) -> FastAPI:
    hub = SessionHub(rig, env, substeps, tick_hz, safety_threshold)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(_tick_loop(app))
        yield
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task
        if record_path is not None:
            from .modelio import save_script
            save_script(record_path, hub.plant.applied_log,
                        ticks=hub.plant.tick)

    app = FastAPI(lifespan=lifespan)
    app.state.hub = hub

    async def _tick_loop(app: FastAPI):
        interval = 1.0 / tick_hz
        while True:
            await asyncio.sleep(interval)
            hub.controller_tick()
            hub.plant.step()
            hub.after_step()
            text = hub.message("state_update", hub.state_payload())
            await hub.broadcast(text)
            result_sensor = hub.plant.sensor_reading()
            if result_sensor is not None and result_sensor.hit:
                await hub.broadcast(hub.message("sensor", {
                    "distance": result_sensor.distance,
                    "thermal": result_sensor.thermal,
                    "timestamp": result_sensor.timestamp}))

    @app.get("/model")
    def model_snapshot():
        doc = model_document(rig.model, rig.materials, rig=rig,
                             state=hub.snapshot_state)
        doc["state"]["tick"] = hub.snapshot_tick
        return doc

    @app.get("/record")
    def record():
        return {"ticks": hub.snapshot_tick,
                "commands": [{"tick": t, "delta_l": list(c.delta_l),
                              "stiffness": c.stiffness}
                             for t, c in hub.snapshot_log]}

    @app.websocket("/session")
    async def session(ws: WebSocket):
        role = ws.query_params.get("role", "viewer")
        await ws.accept()
        if role == "writer":
            if hub.writer is not None:
                await ws.send_text(hub.message("error", {
                    "message": "another writer session is active",
                    "echo_seq": None}))
                await ws.close()
                return
            hub.writer = ws
        hub.clients.append(ws)
        last_in = 0
        try:
            while True:
                text = await ws.receive_text()
                try:
                    raw = json.loads(text)
                except json.JSONDecodeError:
                    await ws.send_text(hub.message("error", {
                        "message": "malformed JSON", "echo_seq": None}))
                    continue
                seq = raw.get("seq")
                kind = raw.get("kind")
                if (not isinstance(raw, dict) or kind not in INBOUND_KINDS
                        or not isinstance(seq, int)
                        or not isinstance(raw.get("payload"), dict)):
                    await ws.send_text(hub.message("error", {
                        "message": f"unknown or malformed message kind "
                                   f"{kind!r}",
                        "echo_seq": seq if isinstance(seq, int) else None}))
                    continue
                if seq <= last_in:
                    await ws.send_text(hub.message("error", {
                        "message": f"seq {seq} not increasing (last {last_in})",
                        "echo_seq": seq}))
                    continue
                last_in = seq
                if hub.writer is not ws:
                    await ws.send_text(hub.message("error", {
                        "message": "read-only session cannot send commands",
                        "echo_seq": seq}))
                    continue
                try:
                    reply = hub.handle_command(seq, raw["payload"])
                except (ParameterError, KeyError, TypeError, ValueError) as exc:
                    await ws.send_text(hub.message("error", {
                        "message": f"rejected command: {exc}",
                        "echo_seq": seq}))
                    continue
                if reply is not None:
                    await ws.send_text(reply)
        except WebSocketDisconnect:
            pass
        finally:
            hub.drop(ws)

    return app
