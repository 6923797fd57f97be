/** walk/1 message types and packet parsing.
 *
 * The server answers every client message with exactly one packet; the
 * first packet on a fresh socket is the hello.  Anything that does not
 * decode to one of the four packet shapes is a protocol error.
 */

export interface HelloPacket {
  type: "hello";
  proto: string;
  session: string;
  scene: string;
  streets: string[];
  scenarios: string[];
  pano_size: [number, number];
}

export interface ViewPacket {
  type: "view";
  street: string;
  frame: number;
  asset: string;
  q_view: [number, number, number, number];
  frame_position: [number, number, number];
  avatar: [number, number, number];
  overlays: { water: string | null; shadow: string | null };
  flags: { camera_under_water: boolean; sun_below_horizon: boolean };
  scenario: string | null;
  time: string | null;
}

export interface InfoPacket {
  type: "info";
  building: string;
  height: number | null;
  attributes: Record<string, string>;
  scenario: string | null;
  flood_depth: number | null;
  distance: number;
}

export interface ErrorPacket {
  type: "error";
  code: string;
  detail: string;
}

export type ServerPacket = HelloPacket | ViewPacket | InfoPacket | ErrorPacket;

export type ClientMessage =
  | { type: "move"; dx: number; dy: number }
  | { type: "scenario"; id: string | null }
  | { type: "time"; iso: string | null }
  | { type: "click"; u: number; v: number };

function bad(why: string): never {
  throw new Error(`bad packet: ${why}`);
}

function str(o: Record<string, unknown>, k: string): string {
  const v = o[k];
  if (typeof v !== "string") bad(`${k} must be a string`);
  return v;
}

function num(o: Record<string, unknown>, k: string): number {
  const v = o[k];
  if (typeof v !== "number" || !Number.isFinite(v)) bad(`${k} must be a finite number`);
  return v;
}

function numArray(o: Record<string, unknown>, k: string, n: number): number[] {
  const v = o[k];
  if (!Array.isArray(v) || v.length !== n || v.some((x) => typeof x !== "number")) {
    bad(`${k} must be ${n} numbers`);
  }
  return v as number[];
}

function strOrNull(o: Record<string, unknown>, k: string): string | null {
  const v = o[k];
  if (v === null || v === undefined) return null;
  if (typeof v !== "string") bad(`${k} must be a string or null`);
  return v;
}

export function parsePacket(text: string): ServerPacket {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    bad("not JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) bad("not an object");
  const o = raw as Record<string, unknown>;

  switch (o.type) {
    case "hello": {
      const size = numArray(o, "pano_size", 2);
      const streets = o.streets;
      const scenarios = o.scenarios;
      if (!Array.isArray(streets) || streets.some((s) => typeof s !== "string")) bad("streets");
      if (!Array.isArray(scenarios) || scenarios.some((s) => typeof s !== "string")) bad("scenarios");
      return {
        type: "hello",
        proto: str(o, "proto"),
        session: str(o, "session"),
        scene: str(o, "scene"),
        streets: streets as string[],
        scenarios: scenarios as string[],
        pano_size: [size[0], size[1]],
      };
    }
    case "view": {
      const q = numArray(o, "q_view", 4);
      const fp = numArray(o, "frame_position", 3);
      const av = numArray(o, "avatar", 3);
      const overlays = o.overlays;
      const flags = o.flags;
      if (typeof overlays !== "object" || overlays === null) bad("overlays");
      if (typeof flags !== "object" || flags === null) bad("flags");
      const ov = overlays as Record<string, unknown>;
      const fl = flags as Record<string, unknown>;
      return {
        type: "view",
        street: str(o, "street"),
        frame: num(o, "frame"),
        asset: str(o, "asset"),
        q_view: [q[0], q[1], q[2], q[3]],
        frame_position: [fp[0], fp[1], fp[2]],
        avatar: [av[0], av[1], av[2]],
        overlays: {
          water: (ov.water ?? null) as string | null,
          shadow: (ov.shadow ?? null) as string | null,
        },
        flags: {
          camera_under_water: fl.camera_under_water === true,
          sun_below_horizon: fl.sun_below_horizon === true,
        },
        scenario: strOrNull(o, "scenario"),
        time: strOrNull(o, "time"),
      };
    }
    case "info": {
      const height = o.height;
      const depth = o.flood_depth;
      if (height !== null && typeof height !== "number") bad("height");
      if (depth !== null && typeof depth !== "number") bad("flood_depth");
      const attrs = o.attributes;
      if (typeof attrs !== "object" || attrs === null) bad("attributes");
      return {
        type: "info",
        building: str(o, "building"),
        height: height as number | null,
        attributes: attrs as Record<string, string>,
        scenario: strOrNull(o, "scenario"),
        flood_depth: depth as number | null,
        distance: num(o, "distance"),
      };
    }
    case "error":
      return { type: "error", code: str(o, "code"), detail: str(o, "detail") };
    default:
      bad(`unknown type ${String(o.type)}`);
  }
}
