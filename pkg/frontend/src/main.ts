/** Browser entry point: wires the walk client to canvases and controls.
 *
 * Kept free of logic worth testing; everything interesting lives in the
 * imported modules.
 */

import { WalkClient, TICKS_PER_SECOND } from "./client.js";
import type { ErrorPacket, InfoPacket, ViewPacket } from "./protocol.js";
import { parsePgm, type Gray } from "./pgm.js";
import { renderView, applyAtmosphere, avatarMarker } from "./render.js";
import {
  buildingPaths,
  collectFitPoints,
  fitViewport,
  headingAngleRad,
  parseSceneSummary,
  toCanvas,
  trailPath,
  type SceneSummary,
} from "./minimap.js";
import { quatFromArray } from "./quat.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const viewCanvas = el<HTMLCanvasElement>("view");
const mapCanvas = el<HTMLCanvasElement>("minimap");
const infoCard = el<HTMLElement>("info");
const statusLine = el<HTMLElement>("status");
const scenarioSelect = el<HTMLSelectElement>("scenario");
const timeSlider = el<HTMLInputElement>("time-hour");
const timeToggle = el<HTMLInputElement>("time-on");
const timeLabel = el<HTMLElement>("time-label");
const flagsLine = el<HTMLElement>("flags");

const viewCtx = viewCanvas.getContext("2d")!;
const mapCtx = mapCanvas.getContext("2d")!;

const wsProto = location.protocol === "https:" ? "wss:" : "ws:";
const client = new WalkClient({
  url: `${wsProto}//${location.host}/ws`,
  makeSocket: (url) => new WebSocket(url) as unknown as import("./client.js").SocketLike,
  reconnect: true,
});

let scene: SceneSummary | null = null;
let dirty = true;

// grayscale assets by URL; null marks a fetch in flight or failed
const assetCache = new Map<string, Gray | null>();

function fetchGray(url: string): Gray | null {
  if (assetCache.has(url)) return assetCache.get(url) ?? null;
  assetCache.set(url, null);
  void fetch(url)
    .then((r) => {
      if (!r.ok) throw new Error(`${r.status}`);
      return r.arrayBuffer();
    })
    .then((buf) => {
      assetCache.set(url, parsePgm(new Uint8Array(buf)));
      dirty = true;
    })
    .catch(() => {});
  return null;
}

function mergedOverlay(v: ViewPacket): Gray | null {
  const layers: Gray[] = [];
  for (const url of [v.overlays.water, v.overlays.shadow]) {
    if (!url) continue;
    const g = fetchGray(url);
    if (g) layers.push(g);
  }
  if (layers.length === 0) return null;
  if (layers.length === 1) return layers[0];
  const [a, b] = layers;
  if (a.width !== b.width || a.height !== b.height) return a;
  const data = new Uint8Array(a.data.length);
  for (let i = 0; i < data.length; i++) data[i] = a.data[i] | b.data[i];
  return { width: a.width, height: a.height, data };
}

let frameBuf: Uint8ClampedArray<ArrayBuffer> | undefined;

function drawView(v: ViewPacket): void {
  const w = viewCanvas.width;
  const h = viewCanvas.height;
  const q = quatFromArray(v.q_view);
  frameBuf = renderView(
    { pano: fetchGray(v.asset), overlay: mergedOverlay(v), qView: q, width: w, height: h },
    frameBuf,
  );
  applyAtmosphere(frameBuf, {
    cameraUnderWater: v.flags.camera_under_water,
    sunBelowHorizon: v.flags.sun_below_horizon,
  });
  viewCtx.putImageData(new ImageData(frameBuf, w, h), 0, 0);

  const marker = avatarMarker(v.frame_position, v.avatar, q, w, h);
  if (marker) {
    viewCtx.beginPath();
    viewCtx.arc(marker.x, marker.y, marker.radius, 0, 2 * Math.PI);
    viewCtx.fillStyle = "rgba(255, 180, 40, 0.85)";
    viewCtx.fill();
  }

  const badges: string[] = [];
  if (v.flags.camera_under_water) badges.push("under water");
  if (v.flags.sun_below_horizon) badges.push("sun below horizon");
  flagsLine.textContent = badges.join("  ·  ");
  statusLine.textContent =
    `${v.street} frame ${v.frame}` +
    (v.scenario ? `  ·  scenario ${v.scenario}` : "") +
    (v.time ? `  ·  ${v.time}` : "");
}

function drawMinimap(v: ViewPacket | null): void {
  const cw = mapCanvas.width;
  const ch = mapCanvas.height;
  mapCtx.fillStyle = "#101418";
  mapCtx.fillRect(0, 0, cw, ch);
  if (!scene) return;
  const vp = fitViewport(collectFitPoints(scene, client.trail), cw, ch);

  mapCtx.strokeStyle = "#3d4752";
  mapCtx.fillStyle = "#222a33";
  for (const b of buildingPaths(scene, vp)) {
    mapCtx.beginPath();
    for (let i = 0; i < b.path.length; i++) {
      const [x, y] = b.path[i];
      if (i === 0) mapCtx.moveTo(x, y);
      else mapCtx.lineTo(x, y);
    }
    mapCtx.closePath();
    mapCtx.fill();
    mapCtx.stroke();
  }

  const trail = trailPath(client.trail, vp);
  if (trail.length > 1) {
    mapCtx.strokeStyle = "#4f8edc";
    mapCtx.beginPath();
    mapCtx.moveTo(trail[0][0], trail[0][1]);
    for (const [x, y] of trail.slice(1)) mapCtx.lineTo(x, y);
    mapCtx.stroke();
  }

  if (v) {
    const [ax, ay] = toCanvas(vp, v.avatar[0], v.avatar[1]);
    const heading = headingAngleRad(quatFromArray(v.q_view));
    mapCtx.fillStyle = "#ffb428";
    mapCtx.beginPath();
    mapCtx.arc(ax, ay, 4, 0, 2 * Math.PI);
    mapCtx.fill();
    mapCtx.strokeStyle = "#ffb428";
    mapCtx.beginPath();
    mapCtx.moveTo(ax, ay);
    // canvas y is flipped relative to world north
    mapCtx.lineTo(ax + 12 * Math.cos(heading), ay - 12 * Math.sin(heading));
    mapCtx.stroke();
  }
}

function showInfo(p: InfoPacket | ErrorPacket): void {
  if (p.type === "error") {
    infoCard.textContent = p.code === "NoBuildingAtPixel" ? "no building here" : p.detail;
    return;
  }
  const rows: string[] = [`<b>${p.building}</b>`];
  if (p.height !== null) rows.push(`height ${p.height.toFixed(1)} m`);
  rows.push(`distance ${p.distance.toFixed(1)} m`);
  if (p.flood_depth !== null) {
    rows.push(`flood depth ${p.flood_depth.toFixed(2)} m (${p.scenario})`);
  }
  for (const [k, val] of Object.entries(p.attributes)) rows.push(`${k}: ${val}`);
  infoCard.innerHTML = rows.join("<br>");
}

const KEY_ALIAS: Record<string, string> = {
  arrowup: "w",
  arrowdown: "s",
  arrowleft: "a",
  arrowright: "d",
};

window.addEventListener("keydown", (e) => {
  const k = KEY_ALIAS[e.key.toLowerCase()] ?? e.key.toLowerCase();
  if ("wasd".includes(k) && k.length === 1) {
    client.keyDown(k);
    e.preventDefault();
  }
});
window.addEventListener("keyup", (e) => {
  const k = KEY_ALIAS[e.key.toLowerCase()] ?? e.key.toLowerCase();
  client.keyUp(k);
});

viewCanvas.addEventListener("click", (e) => {
  const rect = viewCanvas.getBoundingClientRect();
  const sx = ((e.clientX - rect.left) / rect.width) * viewCanvas.width;
  const sy = ((e.clientY - rect.top) / rect.height) * viewCanvas.height;
  client
    .clickAt(sx, sy, viewCanvas.width, viewCanvas.height)
    .then(showInfo)
    .catch(() => {});
});

scenarioSelect.addEventListener("change", () => {
  const id = scenarioSelect.value === "" ? null : scenarioSelect.value;
  void client.setScenario(id);
});

function pushTime(): void {
  if (!timeToggle.checked) {
    timeLabel.textContent = "off";
    void client.setTime(null);
    return;
  }
  const hh = String(timeSlider.valueAsNumber).padStart(2, "0");
  const iso = `2024-07-01T${hh}:00:00Z`;
  timeLabel.textContent = iso;
  void client.setTime(iso);
}
timeSlider.addEventListener("input", pushTime);
timeToggle.addEventListener("change", pushTime);

client.onHello = (h) => {
  scenarioSelect.innerHTML = "";
  const none = document.createElement("option");
  none.value = "";
  none.textContent = "no flood";
  scenarioSelect.appendChild(none);
  for (const id of h.scenarios) {
    const opt = document.createElement("option");
    opt.value = id;
    opt.textContent = id;
    scenarioSelect.appendChild(opt);
  }
  statusLine.textContent = `connected: ${h.scene} (${h.streets.join(", ")})`;
};

client.onView = () => {
  dirty = true;
};
client.onDisconnect = () => {
  statusLine.textContent = "disconnected, retrying";
};

void fetch("/scene.json")
  .then((r) => r.json())
  .then((doc) => {
    scene = parseSceneSummary(doc);
    dirty = true;
  })
  .catch(() => {
    statusLine.textContent = "scene.json unavailable";
  });

void client.connect().catch(() => {
  statusLine.textContent = "connection failed";
});

let lastTick = 0;
function frame(now: number): void {
  if (now - lastTick >= 1000 / TICKS_PER_SECOND) {
    lastTick = now;
    client.tick();
  }
  if (dirty && client.view) {
    dirty = false;
    drawView(client.view);
    drawMinimap(client.view);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
