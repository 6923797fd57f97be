import { describe, expect, it } from "vitest";
import {
  buildingPaths,
  collectFitPoints,
  fitViewport,
  headingAngleRad,
  parseSceneSummary,
  toCanvas,
  trailPath,
} from "../src/minimap.js";
import { IDENTITY, fromAxisAngle, vec3 } from "../src/quat.js";

const DOC = {
  format: "cityscene/1",
  origin: { lat_deg: 35.68, lon_deg: 139.76, height_m: 0 },
  terrain: { origin_x: -200, origin_y: -200, cell: 400, values: [[1, 1], [1, 1]] },
  buildings: [
    {
      id: "bldg-1",
      footprint: [[20, -5], [30, -5], [30, 5], [20, 5]],
      base_elevation: 1,
      height: 10,
      attributes: { usage: "retail" },
    },
  ],
  water: [
    { scenario_id: "L1", level: 3.2, extent: [[-40, -40], [40, -40], [40, 40], [-40, 40]] },
  ],
};

describe("parseSceneSummary", () => {
  it("keeps footprints, heights, and water extents", () => {
    const s = parseSceneSummary(DOC);
    expect(s.buildings).toHaveLength(1);
    expect(s.buildings[0].id).toBe("bldg-1");
    expect(s.buildings[0].footprint).toHaveLength(4);
    expect(s.buildings[0].height).toBe(10);
    expect(s.water[0].scenarioId).toBe("L1");
  });

  it("rejects other formats and junk", () => {
    expect(() => parseSceneSummary({ format: "cityscene/2" })).toThrow(/format/);
    expect(() => parseSceneSummary(null)).toThrow();
    expect(() =>
      parseSceneSummary({ ...DOC, buildings: [{ id: "x", footprint: [[1]], height: 2 }] }),
    ).toThrow(/vertex/);
  });
});

describe("viewport fitting", () => {
  it("centers and flips y", () => {
    const vp = fitViewport([[0, 0], [10, 10]], 120, 120, 16);
    expect(vp.scale).toBeCloseTo(8.8, 12);
    expect(toCanvas(vp, 5, 5)).toEqual([60, 60]);
    const [x0, y0] = toCanvas(vp, 0, 0);
    expect(x0).toBeCloseTo(16, 12);
    expect(y0).toBeCloseTo(104, 12);
  });

  it("survives an empty point set", () => {
    const vp = fitViewport([], 100, 100);
    const [x, y] = toCanvas(vp, 0, 0);
    expect(Number.isFinite(x)).toBe(true);
    expect(Number.isFinite(y)).toBe(true);
  });

  it("uses the tighter axis", () => {
    const vp = fitViewport([[0, 0], [100, 10]], 120, 120, 10);
    expect(vp.scale).toBeCloseTo(1, 12);
  });
});

describe("paths", () => {
  it("maps footprints and trails into canvas space", () => {
    const scene = parseSceneSummary(DOC);
    const trail: [number, number, number][] = [[0, 0, 3], [5, 0, 3]];
    const pts = collectFitPoints(scene, trail);
    expect(pts.length).toBe(4 + 2);
    const vp = fitViewport(pts, 200, 200);
    const b = buildingPaths(scene, vp);
    expect(b[0].path).toHaveLength(4);
    const t = trailPath(trail, vp);
    expect(t).toHaveLength(2);
    // both trail points sit at the same world y, so the same canvas y
    expect(t[0][1]).toBeCloseTo(t[1][1], 12);
    expect(t[0][0]).toBeLessThan(t[1][0]);
  });
});

describe("headingAngleRad", () => {
  it("is zero facing east and pi/2 facing north", () => {
    expect(headingAngleRad(IDENTITY)).toBeCloseTo(0, 12);
    expect(headingAngleRad(fromAxisAngle(vec3(0, 0, 1), Math.PI / 2))).toBeCloseTo(
      Math.PI / 2,
      12,
    );
  });
});
