/** Map-view geometry: scene summaries and world-to-canvas transforms.
 *
 * Pure data in, pure data out.  The DOM layer draws the returned paths;
 * nothing here touches a canvas, which keeps the fitting math testable
 * under Node.
 */

import type { Quat } from "./quat.js";
import { rotate, vec3 } from "./quat.js";

export interface FootprintSummary {
  id: string;
  footprint: [number, number][];
  height: number;
}

export interface WaterSummary {
  scenarioId: string;
  extent: [number, number][];
}

export interface SceneSummary {
  buildings: FootprintSummary[];
  water: WaterSummary[];
}

function ringOf(v: unknown, what: string): [number, number][] {
  if (!Array.isArray(v)) throw new Error(`${what}: not an array`);
  return v.map((p) => {
    if (!Array.isArray(p) || p.length < 2 || typeof p[0] !== "number" || typeof p[1] !== "number") {
      throw new Error(`${what}: bad vertex`);
    }
    return [p[0], p[1]];
  });
}

/** Reduce a scene document to what the map needs. */
export function parseSceneSummary(doc: unknown): SceneSummary {
  if (typeof doc !== "object" || doc === null) throw new Error("scene: not an object");
  const d = doc as Record<string, unknown>;
  if (d.format !== "cityscene/1") throw new Error(`scene: unsupported format ${String(d.format)}`);
  const rawB = Array.isArray(d.buildings) ? d.buildings : [];
  const rawW = Array.isArray(d.water) ? d.water : [];
  const buildings = rawB.map((b: Record<string, unknown>) => ({
    id: String(b.id),
    footprint: ringOf(b.footprint, `building ${String(b.id)}`),
    height: typeof b.height === "number" ? b.height : 0,
  }));
  const water = rawW.map((w: Record<string, unknown>) => ({
    scenarioId: String(w.scenario_id),
    extent: ringOf(w.extent, `water ${String(w.scenario_id)}`),
  }));
  return { buildings, water };
}

export interface Viewport {
  scale: number;
  cx: number;
  cy: number;
  cw: number;
  ch: number;
}

/** Scale and center so every point fits with a pixel margin.  World y
 * is north; canvas y grows downward, so the transform flips it. */
export function fitViewport(
  points: readonly [number, number][],
  cw: number,
  ch: number,
  marginPx = 16,
): Viewport {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    if (x < minX) minX = x;
    if (x > maxX) maxX = x;
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  }
  if (!Number.isFinite(minX)) {
    minX = -1;
    maxX = 1;
    minY = -1;
    maxY = 1;
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const usableW = Math.max(cw - 2 * marginPx, 1);
  const usableH = Math.max(ch - 2 * marginPx, 1);
  const scale = Math.min(usableW / spanX, usableH / spanY);
  return { scale, cx: (minX + maxX) / 2, cy: (minY + maxY) / 2, cw, ch };
}

export function toCanvas(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.cw / 2 + (x - vp.cx) * vp.scale, vp.ch / 2 - (y - vp.cy) * vp.scale];
}

/** Corner points that the viewport must cover. */
export function collectFitPoints(
  scene: SceneSummary,
  trail: readonly [number, number, number][],
): [number, number][] {
  const pts: [number, number][] = [];
  for (const b of scene.buildings) pts.push(...b.footprint);
  for (const p of trail) pts.push([p[0], p[1]]);
  return pts;
}

export function buildingPaths(
  scene: SceneSummary,
  vp: Viewport,
): { id: string; path: [number, number][] }[] {
  return scene.buildings.map((b) => ({
    id: b.id,
    path: b.footprint.map(([x, y]) => toCanvas(vp, x, y)),
  }));
}

export function trailPath(
  trail: readonly [number, number, number][],
  vp: Viewport,
): [number, number][] {
  return trail.map((p) => toCanvas(vp, p[0], p[1]));
}

/** World heading of the view's forward axis, radians east of +x. */
export function headingAngleRad(qView: Quat): number {
  const f = rotate(qView, vec3(1, 0, 0));
  return Math.atan2(f.y, f.x);
}
