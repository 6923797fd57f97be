/** walk/1 client: socket lifecycle, movement ticks, request routing.
 *
 * The server sends exactly one reply per message, in order, so requests
 * resolve FIFO.  The socket is injected as a factory so tests can drive
 * the client with a Node websocket or a scripted fake.
 */

import type {
  ClientMessage,
  ErrorPacket,
  HelloPacket,
  InfoPacket,
  ServerPacket,
  ViewPacket,
} from "./protocol.js";
import { parsePacket } from "./protocol.js";
import { quatFromArray, rotate, vec3 } from "./quat.js";
import { DEFAULT_HFOV_DEG, screenToPano } from "./projection.js";

export const WALK_SPEED_M_S = 1.4;
export const TICKS_PER_SECOND = 30;
export const STEP_M = WALK_SPEED_M_S / TICKS_PER_SECOND;

// stop ticking this many messages ahead of the server
const MAX_PENDING = 8;

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((err?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  url: string;
  makeSocket: SocketFactory;
  reconnect?: boolean;
  reconnectDelayMs?: number;
}

export class WalkClient {
  hello: HelloPacket | null = null;
  view: ViewPacket | null = null;
  trail: [number, number, number][] = [];
  readonly keys = new Set<string>();

  onView: ((v: ViewPacket) => void) | null = null;
  onHello: ((h: HelloPacket) => void) | null = null;
  onDisconnect: (() => void) | null = null;

  private sock: SocketLike | null = null;
  private open = false;
  private closed = false;
  private pending: ((p: ServerPacket) => void)[] = [];
  private helloWaiters: ((h: HelloPacket) => void)[] = [];
  private scenario: string | null = null;
  private timeIso: string | null = null;

  constructor(private readonly opts: ClientOptions) {}

  /** Open the socket and resolve with the hello packet. */
  connect(): Promise<HelloPacket> {
    this.closed = false;
    return new Promise((resolve, reject) => {
      let settled = false;
      const sock = this.opts.makeSocket(this.opts.url);
      this.sock = sock;
      this.helloWaiters.push((h) => {
        settled = true;
        resolve(h);
      });
      sock.onopen = () => {
        this.open = true;
      };
      sock.onmessage = (ev) => this.handleMessage(String(ev.data));
      sock.onerror = (err) => {
        if (!settled) {
          settled = true;
          reject(err instanceof Error ? err : new Error("socket error"));
        }
      };
      sock.onclose = () => {
        this.open = false;
        this.sock = null;
        const stranded = this.pending;
        this.pending = [];
        for (const fn of stranded) {
          fn({ type: "error", code: "Disconnected", detail: "socket closed" });
        }
        if (this.onDisconnect) this.onDisconnect();
        if (!settled) {
          settled = true;
          reject(new Error("socket closed before hello"));
        }
        if (!this.closed && this.opts.reconnect) {
          setTimeout(() => {
            if (!this.closed) void this.reconnect();
          }, this.opts.reconnectDelayMs ?? 1000);
        }
      };
    });
  }

  close(): void {
    this.closed = true;
    if (this.sock) this.sock.close();
  }

  get connected(): boolean {
    return this.open && this.hello !== null;
  }

  keyDown(key: string): void {
    this.keys.add(key.toLowerCase());
  }

  keyUp(key: string): void {
    this.keys.delete(key.toLowerCase());
  }

  /** One movement tick.  Sends a move sized for the tick rate (zero
   * when no key is held, which still advances orientation easing
   * server-side).  Returns null when the socket is not ready or too
   * many replies are outstanding. */
  tick(): Promise<ServerPacket> | null {
    if (!this.connected || this.pending.length >= MAX_PENDING) return null;
    const [dx, dy] = this.stepVector();
    return this.request({ type: "move", dx, dy });
  }

  setScenario(id: string | null): Promise<ServerPacket> {
    return this.request({ type: "scenario", id });
  }

  setTime(iso: string | null): Promise<ServerPacket> {
    return this.request({ type: "time", iso });
  }

  /** Map a screen click through the current view into panorama pixels
   * and ask the server what building sits there. */
  clickAt(
    sx: number,
    sy: number,
    sw: number,
    sh: number,
    hfovDeg: number = DEFAULT_HFOV_DEG,
  ): Promise<InfoPacket | ErrorPacket> {
    if (!this.hello || !this.view) {
      return Promise.reject(new Error("no view yet"));
    }
    const [pw, ph] = this.hello.pano_size;
    const q = quatFromArray(this.view.q_view);
    const { u, v } = screenToPano(sx, sy, sw, sh, q, pw, ph, hfovDeg);
    return this.request({ type: "click", u, v }) as Promise<InfoPacket | ErrorPacket>;
  }

  /** Horizontal step for the held keys, scaled to STEP_M. */
  stepVector(): [number, number] {
    let fx = 1;
    let fy = 0;
    if (this.view) {
      const q = quatFromArray(this.view.q_view);
      const f = rotate(q, vec3(1, 0, 0));
      const n = Math.hypot(f.x, f.y);
      if (n > 1e-9) {
        fx = f.x / n;
        fy = f.y / n;
      }
    }
    // world up is +z, so "right" on the ground is forward x up
    const rx = fy;
    const ry = -fx;
    let dx = 0;
    let dy = 0;
    if (this.keys.has("w")) {
      dx += fx;
      dy += fy;
    }
    if (this.keys.has("s")) {
      dx -= fx;
      dy -= fy;
    }
    if (this.keys.has("d")) {
      dx += rx;
      dy += ry;
    }
    if (this.keys.has("a")) {
      dx -= rx;
      dy -= ry;
    }
    const n = Math.hypot(dx, dy);
    if (n < 1e-12) return [0, 0];
    return [(dx / n) * STEP_M, (dy / n) * STEP_M];
  }

  private request(msg: ClientMessage): Promise<ServerPacket> {
    return new Promise((resolve, reject) => {
      if (!this.sock || !this.open) {
        reject(new Error("not connected"));
        return;
      }
      this.pending.push(resolve);
      this.sock.send(JSON.stringify(msg));
    });
  }

  private handleMessage(text: string): void {
    let packet: ServerPacket;
    try {
      packet = parsePacket(text);
    } catch {
      return;
    }
    if (this.hello === null && packet.type === "hello") {
      this.hello = packet;
      const waiters = this.helloWaiters;
      this.helloWaiters = [];
      if (this.onHello) this.onHello(packet);
      for (const fn of waiters) fn(packet);
      return;
    }
    if (packet.type === "view") this.applyView(packet);
    const next = this.pending.shift();
    if (next) next(packet);
  }

  private applyView(v: ViewPacket): void {
    const prev = this.view;
    this.view = v;
    this.scenario = v.scenario;
    this.timeIso = v.time;
    if (!prev || prev.frame !== v.frame || prev.street !== v.street) {
      this.trail.push(v.frame_position);
    }
    if (this.onView) this.onView(v);
  }

  /** New socket means a new server session with default scenario and
   * time, so both are replayed after the fresh hello. */
  private async reconnect(): Promise<void> {
    const wantScenario = this.scenario;
    const wantTime = this.timeIso;
    this.hello = null;
    try {
      await this.connect();
    } catch {
      return;
    }
    if (wantScenario !== null) await this.setScenario(wantScenario);
    if (wantTime !== null) await this.setTime(wantTime);
  }
}
