// Binary frame decoding: the wire record pushed over WS /stream, and the
// PPM (P6) snapshot files served by GET /snapshots/{id}. The console never
// re-encodes pixels; it only unpacks them for the canvas.

export interface FramePixels {
  width: number;
  height: number;
  pixels: Uint8Array; // RGB24 row-major
}

const MAGIC = "SIMF";

/** Unpack a frame-transport record: u32 length | "SIMF" | u16 w | u16 h | RGB24. */
export function decodeFrameRecord(buf: ArrayBuffer): FramePixels {
  if (buf.byteLength < 4) {
    throw new Error("record shorter than its length prefix");
  }
  const view = new DataView(buf);
  const declared = view.getUint32(0);
  if (declared !== buf.byteLength - 4) {
    throw new Error(`length prefix says ${declared}, payload is ${buf.byteLength - 4}`);
  }
  if (buf.byteLength < 12) {
    throw new Error("payload shorter than the frame header");
  }
  let magic = "";
  for (let i = 4; i < 8; i++) {
    magic += String.fromCharCode(view.getUint8(i));
  }
  if (magic !== MAGIC) {
    throw new Error(`bad magic ${magic}`);
  }
  const width = view.getUint16(8);
  const height = view.getUint16(10);
  const pixels = new Uint8Array(buf, 12);
  if (pixels.length !== width * height * 3) {
    throw new Error(`${width}x${height} frame should carry ${width * height * 3} bytes`);
  }
  return { width, height, pixels };
}

/** RGB24 to RGBA for ImageData. */
export function toRgba(frame: FramePixels): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(new ArrayBuffer(frame.width * frame.height * 4));
  for (let i = 0, j = 0; i < frame.pixels.length; i += 3, j += 4) {
    out[j] = frame.pixels[i];
    out[j + 1] = frame.pixels[i + 1];
    out[j + 2] = frame.pixels[i + 2];
    out[j + 3] = 255;
  }
  return out;
}

/** Parse a binary PPM (P6, 8-bit) snapshot into raw RGB pixels. */
export function decodePpm(bytes: Uint8Array): FramePixels {
  if (bytes[0] !== 0x50 || bytes[1] !== 0x36) {
    throw new Error("not a P6 PPM");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // comment line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < bytes.length && !isSpace(bytes[pos])) {
      token += String.fromCharCode(bytes[pos]);
      pos++;
    }
    const value = Number(token);
    if (!Number.isInteger(value)) {
      throw new Error(`bad header token ${token}`);
    }
    fields.push(value);
  }
  const [width, height, maxval] = fields;
  if (maxval !== 255) {
    throw new Error(`only 8-bit PPMs supported, maxval is ${maxval}`);
  }
  pos++; // the single whitespace after maxval
  const pixels = bytes.subarray(pos, pos + width * height * 3);
  if (pixels.length !== width * height * 3) {
    throw new Error("pixel data truncated");
  }
  return { width, height, pixels };
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}
