/**
 * Console entry point: snapshot fetch, WebSocket session, render loop, panel
 * wiring.  The render loop always draws the latest buffered state (dropped
 * frames are fine); banners cover disconnects and sequence gaps.
 */

import { CommandPanel } from "./panel.js";
import {
  ModelSnapshot,
  parseModelSnapshot,
  StateUpdatePayload,
} from "./protocol.js";
import { StructureView } from "./render_three.js";
import {
  sceneFromUpdate,
  StrainHistory,
  TipTrace,
} from "./scene.js";
import { SessionClient } from "./session.js";

const HOST = location.host || "127.0.0.1:8733";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start() {
  const banner = el<HTMLDivElement>("banner");
  const setBanner = (text: string | null) => {
    banner.textContent = text ?? "";
    banner.style.display = text ? "block" : "none";
  };

  setBanner("fetching model snapshot...");
  const snapshot: ModelSnapshot = parseModelSnapshot(
    await (await fetch(`http://${HOST}/model`)).json());
  const strokeLimit = snapshot.materials.stroke_limit;

  const view = new StructureView(el("viewport"));
  const trace = new TipTrace();
  const strains = new StrainHistory();
  let latestDrawn = -1;

  const client = new SessionClient({
    onStatus: (connected) => {
      setBanner(connected ? null : "disconnected - controls disabled");
      controls.forEach((c) => (c.disabled = !connected));
    },
  });
  const panel = new CommandPanel(client, strokeLimit);

  // --- DOM wiring -----------------------------------------------------------
  const sliders = [0, 1, 2].map((i) => {
    const slider = el<HTMLInputElement>(`tendon${i + 1}`);
    slider.min = String(-strokeLimit);
    slider.max = String(strokeLimit);
    slider.step = "0.5";
    slider.value = "0";
    slider.addEventListener("input", () =>
      panel.setSlider(i as 0 | 1 | 2, Number(slider.value)));
    return slider;
  });
  const stiffnessButton = el<HTMLButtonElement>("stiffness");
  stiffnessButton.addEventListener("click", () => {
    panel.toggleStiffness();
    stiffnessButton.textContent = `stiffness: ${panel.stiffness}`;
  });
  const clearButton = el<HTMLButtonElement>("clear-obstacles");
  clearButton.addEventListener("click", () => {
    panel.clearObstacles();
    view.clearObstacles();
  });
  const controls: (HTMLInputElement | HTMLButtonElement)[] = [
    ...sliders, stiffnessButton, clearButton,
  ];

  view.renderer.domElement.addEventListener("click", (event) => {
    if (!client.latest) return;
    const picked = view.pickPoint(event.clientX, event.clientY,
                                  client.latest.tip[2]);
    if (!picked) return;
    if (event.shiftKey) {
      panel.addSphereObstacle(picked, 25, 1.0);
      view.addObstacle(picked, 25);
    } else {
      panel.setWaypoint(picked);
    }
  });

  // --- session -----------------------------------------------------------------
  function connect() {
    const ws = new WebSocket(`ws://${HOST}/session?role=writer`);
    ws.onopen = () => {
      client.resetStream();
      client.attach((text) => ws.send(text));
    };
    ws.onmessage = (event) => client.handleMessage(String(event.data));
    ws.onclose = () => {
      client.detach();
      setTimeout(connect, 1000);
    };
  }
  connect();

  // command coalescing at the service tick rate
  setInterval(() => {
    if (client.connected) panel.tick();
  }, 33);

  const strainLabels = [0, 1, 2].map((i) =>
    el<HTMLSpanElement>(`strain${i + 1}`));
  const sparkCanvas = el<HTMLCanvasElement>("sparklines");

  function drawSparklines() {
    const ctx = sparkCanvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, sparkCanvas.width, sparkCanvas.height);
    const colors = ["#e86a5f", "#5fc6e8", "#9ae85f"];
    const h = sparkCanvas.height / 3;
    strains.series.forEach((series, i) => {
      if (series.length < 2) return;
      const scale = Math.max(...series.map((v) => Math.abs(v)), 0.01);
      ctx.strokeStyle = colors[i];
      ctx.beginPath();
      series.forEach((v, k) => {
        const x = (k / (strains.capacity - 1)) * sparkCanvas.width;
        const y = h * i + h / 2 - (v / scale) * (h / 2 - 2);
        if (k === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    });
  }

  function frame() {
    const state: StateUpdatePayload | null = client.latest;
    if (state && state.tick !== latestDrawn) {
      latestDrawn = state.tick;
      trace.append(state.tip as [number, number, number]);
      strains.append(state.strains);
      view.update(sceneFromUpdate(snapshot, state), trace);
      view.setWaypoints(
        (state.controller?.waypoints ?? []) as [number, number, number][]);
      state.strains.forEach((s, i) =>
        (strainLabels[i].textContent = s.toFixed(4)));
      drawSparklines();
      el("status").textContent =
        `tick ${state.tick}  stiffness x${state.stiffness_scale}  ` +
        `residual ${state.residual.toExponential(1)}`;
    }
    if (client.stale) {
      setBanner("stale data - waiting for resync");
    } else if (client.connected) {
      setBanner(null);
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `failed to start: ${err}`;
    banner.style.display = "block";
  }
});
