/** Minimal quaternion/vector kit matching the server's conventions:
 * scalar-first (w, x, y, z) in packets, Hamilton product, z up. */

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface Quat {
  w: number;
  x: number;
  y: number;
  z: number;
}

export const IDENTITY: Quat = { w: 1, x: 0, y: 0, z: 0 };

export function vec3(x: number, y: number, z: number): Vec3 {
  return { x, y, z };
}

export function norm(v: Vec3): number {
  return Math.hypot(v.x, v.y, v.z);
}

export function normalizeVec(v: Vec3): Vec3 {
  const n = norm(v);
  if (n === 0) throw new Error("zero vector");
  return { x: v.x / n, y: v.y / n, z: v.z / n };
}

export function quat(w: number, x: number, y: number, z: number): Quat {
  return { w, x, y, z };
}

export function quatFromArray(a: number[]): Quat {
  if (a.length !== 4 || a.some((v) => typeof v !== "number" || !Number.isFinite(v))) {
    throw new Error("quaternion must be four finite numbers");
  }
  return normalizeQuat({ w: a[0], x: a[1], y: a[2], z: a[3] });
}

export function normalizeQuat(q: Quat): Quat {
  const n = Math.hypot(q.w, q.x, q.y, q.z);
  if (n === 0) throw new Error("zero quaternion");
  return { w: q.w / n, x: q.x / n, y: q.y / n, z: q.z / n };
}

export function multiply(a: Quat, b: Quat): Quat {
  return {
    w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
    x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
    y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
    z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
  };
}

export function conjugate(q: Quat): Quat {
  return { w: q.w, x: -q.x, y: -q.y, z: -q.z };
}

/** Rotate v by q using the expanded sandwich product. */
export function rotate(q: Quat, v: Vec3): Vec3 {
  const tx = 2 * (q.y * v.z - q.z * v.y);
  const ty = 2 * (q.z * v.x - q.x * v.z);
  const tz = 2 * (q.x * v.y - q.y * v.x);
  return {
    x: v.x + q.w * tx + (q.y * tz - q.z * ty),
    y: v.y + q.w * ty + (q.z * tx - q.x * tz),
    z: v.z + q.w * tz + (q.x * ty - q.y * tx),
  };
}

export function fromAxisAngle(axis: Vec3, rad: number): Quat {
  const a = normalizeVec(axis);
  const s = Math.sin(rad / 2);
  return { w: Math.cos(rad / 2), x: a.x * s, y: a.y * s, z: a.z * s };
}

export function angleBetween(a: Quat, b: Quat): number {
  const dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  return 2 * Math.acos(Math.min(1, Math.abs(dot)));
}
