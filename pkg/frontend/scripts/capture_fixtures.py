"""Capture real session-protocol traffic into JSON fixtures for the console
tests: a scripted writer session (stiffness toggle, tendon drag, waypoint),
the resulting state_update stream, an error exchange, and the /model snapshot
taken right after the last update."""

import json
import pathlib

from fastapi.testclient import TestClient

import tenspine as ts
from tenspine.service import create_app

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    model = ts.generate_topology(ts.TopologyParams(n=3, m=6))
    rig = ts.form_find(model)
    app = create_app(rig, tick_hz=60.0, substeps=1500)

    sent = []
    received = []

    def send(ws, seq, payload):
        msg = {"kind": "command", "seq": seq, "payload": payload}
        sent.append(msg)
        ws.send_text(json.dumps(msg))

    def drain(ws, updates):
        got = 0
        while got < updates:
            msg = json.loads(ws.receive_text())
            received.append(msg)
            if msg["kind"] == "state_update":
                got += 1

    with TestClient(app) as client:
        with client.websocket_connect("/session?role=writer") as ws:
            drain(ws, 2)
            send(ws, 1, {"stiffness": "low"})
            drain(ws, 3)
            send(ws, 2, {"delta_l": [-18.0, 6.0, 6.0]})
            drain(ws, 4)
            send(ws, 3, {"waypoint": [6.0, 2.0, 20.0]})
            drain(ws, 4)
            ws.send_text("{broken json")
            # error reply plus a couple more updates
            while True:
                msg = json.loads(ws.receive_text())
                received.append(msg)
                if msg["kind"] == "error":
                    break
            drain(ws, 2)
            # snapshot while connected, then drain until the update whose
            # tick matches it has arrived (ticks broadcast consecutively),
            # so the fixtures carry one exactly-corresponding pair
            snapshot = client.get("/model").json()
            snap_tick = snapshot["state"]["tick"]
            while not any(m["kind"] == "state_update"
                          and m["payload"]["tick"] == snap_tick
                          for m in received):
                drain(ws, 1)

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "sent_commands.json").write_text(json.dumps(sent, indent=1))
    (OUT / "received_messages.json").write_text(json.dumps(received, indent=1))
    (OUT / "model_snapshot.json").write_text(json.dumps(snapshot, indent=1))
    kinds = [m["kind"] for m in received]
    print(f"captured {len(received)} messages "
          f"({kinds.count('state_update')} updates, "
          f"{kinds.count('error')} errors), snapshot with "
          f"{len(snapshot['nodes'])} nodes")


if __name__ == "__main__":
    main()
