import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

import tenspine as ts
from tenspine.plant import run_script
from tenspine.service import create_app

TICK_HZ = 60.0
SUBSTEPS = 1500


@pytest.fixture()
def client(desk_rig):
    app = create_app(desk_rig, tick_hz=TICK_HZ, substeps=SUBSTEPS)
    with TestClient(app) as client:
        yield client


def recv_kind(ws, kind, limit=50):
    for _ in range(limit):
        msg = json.loads(ws.receive_text())
        if msg["kind"] == kind:
            return msg
    raise AssertionError(f"no {kind} message within {limit} messages")


def command(ws, seq, payload):
    ws.send_text(json.dumps({"kind": "command", "seq": seq,
                             "payload": payload}))


def test_snapshot_endpoint(client, desk_rig):
    doc = client.get("/model").json()
    assert doc["format_version"] == 1
    assert doc["params"]["n"] == 3
    assert doc["rig"] is not None
    assert doc["state"] is not None
    assert len(doc["nodes"]) == desk_rig.model.node_count


def test_zero_command_keeps_rest_state(client, desk_rig):
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 1, {"delta_l": [0.0, 0.0, 0.0]})
        msg = recv_kind(ws, "state_update")
        for _ in range(3):
            msg = recv_kind(ws, "state_update")
        tip = np.asarray(msg["payload"]["tip"])
        assert np.linalg.norm(tip - desk_rig.rest_tip()) < 1e-6
        assert msg["payload"]["converged"]


def test_seq_strictly_increasing_and_gap_free(client):
    with client.websocket_connect("/session") as ws:
        seqs = [json.loads(ws.receive_text())["seq"] for _ in range(6)]
    assert all(b > a for a, b in zip(seqs, seqs[1:]))


def test_malformed_json_gets_error_and_session_survives(client):
    with client.websocket_connect("/session?role=writer") as ws:
        ws.send_text("{broken")
        msg = recv_kind(ws, "error")
        assert "malformed" in msg["payload"]["message"]
        command(ws, 1, {"delta_l": [-5.0, 0.0, 0.0]})
        msg = recv_kind(ws, "state_update", limit=80)
        while msg["payload"]["applied_seq"] != 1:
            msg = recv_kind(ws, "state_update", limit=80)
        assert msg["payload"]["delta_l"][0] == -5.0


def test_unknown_kind_rejected(client):
    with client.websocket_connect("/session?role=writer") as ws:
        ws.send_text(json.dumps({"kind": "telemetry", "seq": 1,
                                 "payload": {}}))
        msg = recv_kind(ws, "error")
        assert "unknown" in msg["payload"]["message"]
        assert msg["payload"]["echo_seq"] == 1


def test_non_increasing_seq_rejected(client):
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 5, {"stiffness": "low"})
        command(ws, 5, {"stiffness": "high"})
        msg = recv_kind(ws, "error")
        assert "seq" in msg["payload"]["message"]
        assert msg["payload"]["echo_seq"] == 5


def test_second_writer_rejected(client):
    with client.websocket_connect("/session?role=writer") as ws1:
        with client.websocket_connect("/session?role=writer") as ws2:
            msg = json.loads(ws2.receive_text())
            assert msg["kind"] == "error"
            assert "another writer" in msg["payload"]["message"]


def test_viewer_commands_rejected(client):
    with client.websocket_connect("/session") as ws:
        command(ws, 1, {"stiffness": "low"})
        msg = recv_kind(ws, "error")
        assert "read-only" in msg["payload"]["message"]


def test_command_reflected_within_two_updates(client):
    with client.websocket_connect("/session?role=writer") as ws:
        recv_kind(ws, "state_update")
        command(ws, 7, {"delta_l": [-10.0, 0.0, 0.0]})
        updates = [recv_kind(ws, "state_update") for _ in range(3)]
        applied = [u["payload"]["applied_seq"] for u in updates]
        assert 7 in applied[:2] or applied[0] == 7


def test_stroke_violation_rejected_politely(client):
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 1, {"delta_l": [-500.0, 0.0, 0.0]})
        msg = recv_kind(ws, "error")
        assert "rejected" in msg["payload"]["message"]
        command(ws, 2, {"delta_l": [-5.0, 0.0, 0.0]})
        msg = recv_kind(ws, "state_update", limit=80)
        while msg["payload"]["applied_seq"] != 2:
            msg = recv_kind(ws, "state_update", limit=80)


def test_stiffness_switch_increases_displacement(desk_rig):
    app = create_app(desk_rig, tick_hz=TICK_HZ, substeps=20000)
    with TestClient(app) as client:
        with client.websocket_connect("/session?role=writer") as ws:
            command(ws, 1, {"delta_l": [-35.0, 0.0, 0.0],
                            "stiffness": "high"})
            for _ in range(6):
                msg = recv_kind(ws, "state_update")
            tip_high = np.asarray(msg["payload"]["tip"])
            command(ws, 2, {"stiffness": "low"})
            for _ in range(8):
                msg = recv_kind(ws, "state_update")
            tip_low = np.asarray(msg["payload"]["tip"])
    rest = desk_rig.rest_tip()
    assert (np.linalg.norm(tip_low - rest)
            > np.linalg.norm(tip_high - rest) * 1.02)


def test_metrics_on_request(client):
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 1, {"action": "metrics"})
        msg = recv_kind(ws, "metrics")
        assert "strains" in msg["payload"]
        assert "max_cable_force" in msg["payload"]


def test_obstacle_edit_and_sensor_stream(client, desk_rig):
    tip = desk_rig.rest_tip()
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 1, {"obstacle": {
            "op": "add", "shape": "sphere",
            "center": [tip[0], tip[1], tip[2] - 80.0],
            "radius": 30.0, "thermal": 1.0}})
        msg = recv_kind(ws, "sensor", limit=120)
        assert msg["payload"]["distance"] == pytest.approx(50.0, abs=2.0)
        assert msg["payload"]["thermal"] == 1.0


def test_waypoint_engages_controller(client, desk_rig):
    target = desk_rig.rest_tip() + np.array([8.0, 0.0, 2.0])
    with client.websocket_connect("/session?role=writer") as ws:
        command(ws, 1, {"waypoint": list(map(float, target))})
        msg = recv_kind(ws, "state_update")
        for _ in range(40):
            msg = recv_kind(ws, "state_update")
            ctl = msg["payload"]["controller"]
            if ctl and ctl["error_norm"] is not None \
                    and ctl["error_norm"] < 2.0:
                break
        assert msg["payload"]["controller"] is not None
        err = msg["payload"]["controller"]["error_norm"]
        assert err is not None and err < 2.0


def test_record_endpoint_and_replay_determinism(desk_rig):
    app = create_app(desk_rig, tick_hz=TICK_HZ, substeps=SUBSTEPS)
    with TestClient(app) as client:
        with client.websocket_connect("/session?role=writer") as ws:
            recv_kind(ws, "state_update")
            command(ws, 1, {"delta_l": [-20.0, 5.0, 5.0]})
            for _ in range(4):
                recv_kind(ws, "state_update")
            command(ws, 2, {"stiffness": "low"})
            for _ in range(4):
                recv_kind(ws, "state_update")
        record = client.get("/record").json()
        final_doc = client.get("/model").json()
    live_coords = np.asarray(final_doc["state"]["coords"]).reshape(-1, 3)
    live_tick = final_doc["state"]["tick"]

    entries = [(c["tick"], ts.ActuationCommand(delta_l=tuple(c["delta_l"]),
                                               stiffness=c["stiffness"]))
               for c in record["commands"]]
    results, session = run_script(desk_rig, live_tick, entries,
                                  substeps=SUBSTEPS, tick_dt=1.0 / TICK_HZ)
    assert np.abs(session.coords - live_coords).max() < 1e-9
