/** Equirectangular pano mapping and the pinhole screen camera.
 *
 * Pano convention (same as the server): pixel (u, v) of a W x H panorama
 * looks along azimuth phi = 2*pi*(u+0.5)/W - pi measured from +x toward +y,
 * elevation psi = pi/2 - pi*(v+0.5)/H.  Served panoramas are leveled, so
 * pano pixels are world directions at the capture point.
 *
 * Screen convention: x right, y down, horizontal field of view hfov, view
 * camera looks along +x with +y to the screen's right and z up, oriented in
 * the world by q_view.
 */
import { Quat, Vec3, conjugate, normalizeVec, rotate } from "./quat.js";

export const DEFAULT_HFOV_DEG = 90;

/** World direction of pano pixel (u, v); accepts fractional coordinates. */
export function panoRay(u: number, v: number, w: number, h: number): Vec3 {
  const phi = (2 * Math.PI * (u + 0.5)) / w - Math.PI;
  const psi = Math.PI / 2 - (Math.PI * (v + 0.5)) / h;
  const c = Math.cos(psi);
  return { x: c * Math.cos(phi), y: c * Math.sin(phi), z: Math.sin(psi) };
}

/** Fractional pano coordinates of a world direction.  u is wrapped into
 * [0, w); integer values land on pixel centers, matching panoRay. */
export function panoPixel(d: Vec3, w: number, h: number): { u: number; v: number } {
  const n = normalizeVec(d);
  const phi = Math.atan2(n.y, n.x);
  const psi = Math.asin(Math.max(-1, Math.min(1, n.z)));
  let u = (w * (phi + Math.PI)) / (2 * Math.PI) - 0.5;
  u = ((u % w) + w) % w;
  let v = (h * (Math.PI / 2 - psi)) / Math.PI - 0.5;
  v = Math.max(0, Math.min(h - 1e-6, v));
  return { u, v };
}

/** Camera-frame ray through screen pixel (sx, sy) on a sw x sh viewport. */
export function screenRay(
  sx: number,
  sy: number,
  sw: number,
  sh: number,
  hfovDeg: number = DEFAULT_HFOV_DEG,
): Vec3 {
  const half = Math.tan(((hfovDeg / 2) * Math.PI) / 180);
  const xn = ((sx + 0.5 - sw / 2) / (sw / 2)) * half;
  const yn = ((sy + 0.5 - sh / 2) / (sw / 2)) * half;
  return normalizeVec({ x: 1, y: xn, z: -yn });
}

/** Pano coordinates displayed at screen pixel (sx, sy) under q_view.  The
 * click path sends exactly this, so clicks invert the rendered projection. */
export function screenToPano(
  sx: number,
  sy: number,
  sw: number,
  sh: number,
  qView: Quat,
  panoW: number,
  panoH: number,
  hfovDeg: number = DEFAULT_HFOV_DEG,
): { u: number; v: number } {
  return panoPixel(rotate(qView, screenRay(sx, sy, sw, sh, hfovDeg)), panoW, panoH);
}

/** Screen position showing world direction d, or null when it is outside
 * the viewport (behind the camera or past the frustum edge). */
export function screenPointOf(
  d: Vec3,
  qView: Quat,
  sw: number,
  sh: number,
  hfovDeg: number = DEFAULT_HFOV_DEG,
): { x: number; y: number } | null {
  const c = rotate(conjugate(qView), d);
  if (c.x <= 1e-9) return null;
  const half = Math.tan(((hfovDeg / 2) * Math.PI) / 180);
  const x = sw / 2 + ((c.y / c.x) * (sw / 2)) / half - 0.5;
  const y = sh / 2 + ((-c.z / c.x) * (sw / 2)) / half - 0.5;
  if (x < -0.5 || x > sw - 0.5 || y < -0.5 || y > sh - 0.5) return null;
  return { x, y };
}
