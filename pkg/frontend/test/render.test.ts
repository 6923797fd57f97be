import { describe, expect, it } from "vitest";
import type { Gray } from "../src/pgm.js";
import { applyAtmosphere, avatarMarker, renderView } from "../src/render.js";
import { compositePixel, WATER_BIT } from "../src/overlay.js";
import { screenToPano } from "../src/projection.js";
import { IDENTITY, fromAxisAngle, vec3 } from "../src/quat.js";

const PW = 64;
const PH = 32;

function rampPano(): Gray {
  const data = new Uint8Array(PW * PH);
  for (let i = 0; i < data.length; i++) data[i] = i % 251;
  return { width: PW, height: PH, data };
}

function grayAtScreen(pano: Gray, sx: number, sy: number, sw: number, sh: number): number {
  const p = screenToPano(sx, sy, sw, sh, IDENTITY, pano.width, pano.height);
  const u = ((Math.round(p.u) % pano.width) + pano.width) % pano.width;
  const v = Math.min(pano.height - 1, Math.max(0, Math.round(p.v)));
  return pano.data[v * pano.width + u];
}

describe("renderView", () => {
  it("samples the pano by nearest neighbour through the view", () => {
    const pano = rampPano();
    const sw = 16;
    const sh = 8;
    const buf = renderView({ pano, overlay: null, qView: IDENTITY, width: sw, height: sh });
    expect(buf.length).toBe(sw * sh * 4);
    for (const [sx, sy] of [
      [0, 0],
      [8, 4],
      [15, 7],
      [3, 6],
    ] as const) {
      const want = grayAtScreen(pano, sx, sy, sw, sh);
      const k = (sy * sw + sx) * 4;
      expect(buf[k]).toBe(want);
      expect(buf[k + 1]).toBe(want);
      expect(buf[k + 2]).toBe(want);
      expect(buf[k + 3]).toBe(255);
    }
  });

  it("rotating the view shifts what lands at screen center", () => {
    const pano = rampPano();
    const q = fromAxisAngle(vec3(0, 0, 1), Math.PI / 2);
    const a = renderView({ pano, overlay: null, qView: IDENTITY, width: 16, height: 8 });
    const b = renderView({ pano, overlay: null, qView: q, width: 16, height: 8 });
    const k = (4 * 16 + 8) * 4;
    // identity centers on pano column PW/2, the yawed view on 3*PW/4
    expect(a[k]).toBe(pano.data[16 * PW + 32]);
    expect(b[k]).toBe(pano.data[16 * PW + 48]);
  });

  it("applies overlay bits at the sampled pano pixel", () => {
    const pano: Gray = { width: PW, height: PH, data: new Uint8Array(PW * PH).fill(100) };
    const overlay: Gray = { width: PW, height: PH, data: new Uint8Array(PW * PH) };
    overlay.data.fill(WATER_BIT);
    const buf = renderView({ pano, overlay, qView: IDENTITY, width: 8, height: 4 });
    const [r, g, b] = compositePixel(100, WATER_BIT);
    expect(buf[0]).toBe(r);
    expect(buf[1]).toBe(g);
    expect(buf[2]).toBe(b);
  });

  it("draws the placeholder grid when the pano is missing", () => {
    const buf = renderView({ pano: null, overlay: null, qView: IDENTITY, width: 16, height: 8 });
    const seen = new Set<number>();
    for (let k = 0; k < buf.length; k += 4) seen.add(buf[k]);
    for (const v of seen) expect([34, 70]).toContain(v);
    expect(seen.size).toBeGreaterThan(1);
  });

  it("reuses a matching output buffer", () => {
    const pano = rampPano();
    const first = renderView({ pano, overlay: null, qView: IDENTITY, width: 8, height: 4 });
    const second = renderView({ pano, overlay: null, qView: IDENTITY, width: 8, height: 4 }, first);
    expect(second).toBe(first);
  });
});

describe("applyAtmosphere", () => {
  it("leaves the buffer alone without flags", () => {
    const buf = new Uint8ClampedArray([10, 20, 30, 255]);
    applyAtmosphere(buf, { cameraUnderWater: false, sunBelowHorizon: false });
    expect(Array.from(buf)).toEqual([10, 20, 30, 255]);
  });

  it("tints underwater toward deep blue", () => {
    const buf = new Uint8ClampedArray([100, 100, 100, 255]);
    applyAtmosphere(buf, { cameraUnderWater: true, sunBelowHorizon: false });
    expect(buf[0]).toBe(56);
    expect(buf[1]).toBe(76);
    expect(buf[2]).toBe(110);
    expect(buf[3]).toBe(255);
  });

  it("darkens when the sun is down", () => {
    const buf = new Uint8ClampedArray([200, 200, 200, 255]);
    applyAtmosphere(buf, { cameraUnderWater: false, sunBelowHorizon: true });
    expect(buf[0]).toBe(110);
    expect(buf[2]).toBe(124);
  });
});

describe("avatarMarker", () => {
  it("puts the dot at screen center for an avatar straight ahead", () => {
    const m = avatarMarker([0, 0, 3], [5, 0, 3], IDENTITY, 100, 50)!;
    expect(m).not.toBeNull();
    expect(m.x).toBeCloseTo(49.5, 6);
    expect(m.y).toBeCloseTo(24.5, 6);
    expect(m.radius).toBeGreaterThan(0);
  });

  it("hides the dot behind the camera or at the camera", () => {
    expect(avatarMarker([0, 0, 3], [-5, 0, 3], IDENTITY, 100, 50)).toBeNull();
    expect(avatarMarker([1, 2, 3], [1, 2, 3], IDENTITY, 100, 50)).toBeNull();
  });
});
