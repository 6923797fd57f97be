import { describe, expect, it } from "vitest";
import { parsePgm } from "../src/pgm.js";

function pgm(header: string, payload: number[]): Uint8Array {
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + payload.length);
  out.set(head, 0);
  out.set(payload, head.length);
  return out;
}

describe("parsePgm", () => {
  it("reads a plain P5 image", () => {
    const img = parsePgm(pgm("P5\n3 2\n255\n", [0, 10, 20, 30, 40, 250]));
    expect(img.width).toBe(3);
    expect(img.height).toBe(2);
    expect(Array.from(img.data)).toEqual([0, 10, 20, 30, 40, 250]);
  });

  it("skips header comments", () => {
    const img = parsePgm(pgm("P5\n# made by a test\n2 1\n# again\n255\n", [7, 8]));
    expect(img.width).toBe(2);
    expect(Array.from(img.data)).toEqual([7, 8]);
  });

  it("accepts any single whitespace after maxval", () => {
    const img = parsePgm(pgm("P5 2 2 255 ", [1, 2, 3, 4]));
    expect(img.height).toBe(2);
    expect(img.data[3]).toBe(4);
  });

  it("keeps only width*height payload bytes", () => {
    const img = parsePgm(pgm("P5\n2 1\n255\n", [9, 9, 9, 9]));
    expect(img.data.length).toBe(2);
  });

  it("rejects other magics", () => {
    expect(() => parsePgm(pgm("P2\n2 1\n255\n", [0, 0]))).toThrow(/P5/);
    expect(() => parsePgm(new Uint8Array([0x42]))).toThrow();
  });

  it("rejects bad dimensions and maxval", () => {
    expect(() => parsePgm(pgm("P5\n0 4\n255\n", []))).toThrow(/dimensions/);
    expect(() => parsePgm(pgm("P5\n2 2\n70000\n", [0, 0, 0, 0]))).toThrow(/maxval/);
    expect(() => parsePgm(pgm("P5\n2 2\n0\n", [0, 0, 0, 0]))).toThrow(/maxval/);
  });

  it("rejects truncated payloads", () => {
    expect(() => parsePgm(pgm("P5\n4 4\n255\n", [1, 2, 3]))).toThrow(/payload/);
  });

  it("rejects a header that ends early", () => {
    expect(() => parsePgm(pgm("P5\n2", []))).toThrow();
  });
});
