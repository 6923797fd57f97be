/** CPU renderer: pinhole view into an equirectangular panorama.
 *
 * Every screen pixel is lifted to a camera ray, rotated into the world
 * by the current view orientation, and looked up in the panorama by
 * nearest neighbour.  Overlay bits are sampled at the same panorama
 * pixel so water and shadow stay glued to the imagery.
 */

import type { Gray } from "./pgm.js";
import type { Quat, Vec3 } from "./quat.js";
import { norm, rotate, vec3 } from "./quat.js";
import {
  DEFAULT_HFOV_DEG,
  panoPixel,
  screenPointOf,
  screenRay,
} from "./projection.js";
import { compositePixel } from "./overlay.js";

export interface ViewInputs {
  pano: Gray | null;
  overlay: Gray | null;
  qView: Quat;
  width: number;
  height: number;
  hfovDeg?: number;
}

// virtual grid used when the panorama has not arrived yet
const PLACEHOLDER_W = 256;
const PLACEHOLDER_H = 128;

function clampIndex(x: number, n: number): number {
  const i = Math.round(x);
  if (i < 0) return 0;
  if (i >= n) return n - 1;
  return i;
}

function wrapIndex(x: number, n: number): number {
  const i = Math.round(x) % n;
  return i < 0 ? i + n : i;
}

function sampleGray(img: Gray, d: Vec3): number {
  const p = panoPixel(d, img.width, img.height);
  const u = wrapIndex(p.u, img.width);
  const v = clampIndex(p.v, img.height);
  return img.data[v * img.width + u];
}

function placeholderGray(d: Vec3): number {
  const p = panoPixel(d, PLACEHOLDER_W, PLACEHOLDER_H);
  const u = wrapIndex(p.u, PLACEHOLDER_W);
  const v = clampIndex(p.v, PLACEHOLDER_H);
  return u % 16 === 0 || v % 16 === 0 ? 70 : 34;
}

/** Fill an RGBA buffer with the projected view.  Allocates when `out`
 * is missing or the wrong size. */
export function renderView(
  inputs: ViewInputs,
  out?: Uint8ClampedArray<ArrayBuffer>,
): Uint8ClampedArray<ArrayBuffer> {
  const { pano, overlay, qView, width, height } = inputs;
  const hfov = inputs.hfovDeg ?? DEFAULT_HFOV_DEG;
  const n = width * height * 4;
  const buf = out && out.length === n ? out : new Uint8ClampedArray(n);

  let k = 0;
  for (let sy = 0; sy < height; sy++) {
    for (let sx = 0; sx < width; sx++) {
      const d = rotate(qView, screenRay(sx, sy, width, height, hfov));
      const gray = pano ? sampleGray(pano, d) : placeholderGray(d);
      const bits = overlay ? sampleGray(overlay, d) : 0;
      const [r, g, b] = compositePixel(gray, bits);
      buf[k++] = r;
      buf[k++] = g;
      buf[k++] = b;
      buf[k++] = 255;
    }
  }
  return buf;
}

export interface AtmosphereFlags {
  cameraUnderWater: boolean;
  sunBelowHorizon: boolean;
}

/** Whole-frame tint for the two view flags, applied in place. */
export function applyAtmosphere(buf: Uint8ClampedArray, flags: AtmosphereFlags): void {
  if (!flags.cameraUnderWater && !flags.sunBelowHorizon) return;
  for (let k = 0; k < buf.length; k += 4) {
    let r = buf[k];
    let g = buf[k + 1];
    let b = buf[k + 2];
    if (flags.cameraUnderWater) {
      r = r * 0.5 + 12 * 0.5;
      g = g * 0.5 + 52 * 0.5;
      b = b * 0.5 + 120 * 0.5;
    }
    if (flags.sunBelowHorizon) {
      r *= 0.55;
      g *= 0.55;
      b *= 0.62;
    }
    buf[k] = Math.round(r);
    buf[k + 1] = Math.round(g);
    buf[k + 2] = Math.round(b);
  }
}

export interface Marker {
  x: number;
  y: number;
  radius: number;
}

/** Screen location for the avatar dot, or null when it is behind the
 * camera, outside the viewport, or at the camera itself. */
export function avatarMarker(
  framePos: [number, number, number],
  avatarPos: [number, number, number],
  qView: Quat,
  sw: number,
  sh: number,
  hfovDeg: number = DEFAULT_HFOV_DEG,
): Marker | null {
  const d = vec3(
    avatarPos[0] - framePos[0],
    avatarPos[1] - framePos[1],
    avatarPos[2] - framePos[2],
  );
  const dist = norm(d);
  if (dist < 1e-6) return null;
  const p = screenPointOf(d, qView, sw, sh, hfovDeg);
  if (p === null) return null;
  const radius = Math.max(3, Math.min(24, 18 / dist * (sh / 240)));
  return { x: p.x, y: p.y, radius };
}
