/** Binary PGM (P5) reader.  Panoramas and overlay rasters arrive in this
 * format; maxval above 255 is not used by the service and is rejected. */

export interface Gray {
  width: number;
  height: number;
  data: Uint8Array;
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d || b === 0x0b || b === 0x0c;
}

export function parsePgm(bytes: Uint8Array): Gray {
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a P5 PGM");
  }
  let pos = 2;

  function token(): string {
    // skip whitespace and # comments
    for (;;) {
      while (pos < bytes.length && isSpace(bytes[pos])) pos++;
      if (pos < bytes.length && bytes[pos] === 0x23) {
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
        continue;
      }
      break;
    }
    const start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    if (pos === start) throw new Error("truncated PGM header");
    let s = "";
    for (let i = start; i < pos; i++) s += String.fromCharCode(bytes[i]);
    return s;
  }

  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error("bad PGM dimensions");
  }
  if (!Number.isInteger(maxval) || maxval <= 0 || maxval > 255) {
    throw new Error(`unsupported PGM maxval ${maxval}`);
  }
  pos++; // single whitespace byte after maxval
  const need = width * height;
  if (bytes.length - pos < need) throw new Error("truncated PGM payload");
  return { width, height, data: bytes.slice(pos, pos + need) };
}
