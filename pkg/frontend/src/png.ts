/** Deterministic 8-bit grayscale PNG encoding/decoding.
 *
 * The encoder emits stored (uncompressed) deflate blocks so the byte output
 * is a pure function of the pixel data — no dependence on a compressor's
 * version or settings. The decoder handles exactly that subset, enough to
 * round-trip our own mask exports.
 */

const PNG_SIGNATURE = new Uint8Array([137, 80, 78, 71, 13, 10, 26, 10]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([
    (value >>> 24) & 0xff,
    (value >>> 16) & 0xff,
    (value >>> 8) & 0xff,
    value & 0xff,
  ]);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const typeBytes = new TextEncoder().encode(type);
  const body = concat([typeBytes, data]);
  return concat([u32be(data.length), body, u32be(crc32(body))]);
}

/** zlib stream holding the raw bytes in stored (BTYPE=0) deflate blocks. */
function zlibStored(raw: Uint8Array): Uint8Array {
  const parts: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  const max = 65535;
  for (let offset = 0; offset < raw.length || offset === 0; offset += max) {
    const block = raw.subarray(offset, Math.min(offset + max, raw.length));
    const final = offset + max >= raw.length ? 1 : 0;
    const len = block.length;
    parts.push(
      new Uint8Array([
        final,
        len & 0xff,
        (len >>> 8) & 0xff,
        ~len & 0xff,
        (~len >>> 8) & 0xff,
      ]),
      block,
    );
    if (offset + max >= raw.length) break;
  }
  parts.push(u32be(adler32(raw)));
  return concat(parts);
}

/** Encode an 8-bit grayscale image (row-major, length width*height). */
export function encodeGrayPng(
  width: number,
  height: number,
  gray: Uint8Array,
): Uint8Array {
  if (gray.length !== width * height) {
    throw new Error(`pixel buffer ${gray.length} != ${width}x${height}`);
  }
  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(gray.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const ihdr = concat([
    u32be(width),
    u32be(height),
    new Uint8Array([8, 0, 0, 0, 0]), // depth 8, grayscale, default methods
  ]);
  return concat([
    PNG_SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

function inflateStored(z: Uint8Array): Uint8Array {
  if (z.length < 2 || (z[0] & 0x0f) !== 8) {
    throw new Error("not a zlib stream");
  }
  const parts: Uint8Array[] = [];
  let pos = 2;
  for (;;) {
    const header = z[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("only stored deflate blocks are supported");
    }
    const len = z[pos + 1] | (z[pos + 2] << 8);
    const nlen = z[pos + 3] | (z[pos + 4] << 8);
    if ((len ^ nlen) !== 0xffff) throw new Error("corrupt stored block");
    parts.push(z.subarray(pos + 5, pos + 5 + len));
    pos += 5 + len;
    if (header & 1) break;
  }
  const raw = concat(parts);
  const declared =
    ((z[pos] << 24) | (z[pos + 1] << 16) | (z[pos + 2] << 8) | z[pos + 3]) >>>
    0;
  if (declared !== adler32(raw)) throw new Error("zlib checksum mismatch");
  return raw;
}

export interface GrayImage {
  width: number;
  height: number;
  gray: Uint8Array;
}

/** Decode a grayscale PNG produced by encodeGrayPng (filter 0, stored deflate). */
export function decodeGrayPng(bytes: Uint8Array): GrayImage {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG");
  }
  let width = 0;
  let height = 0;
  const idatParts: Uint8Array[] = [];
  let pos = 8;
  while (pos < bytes.length) {
    const len =
      ((bytes[pos] << 24) |
        (bytes[pos + 1] << 16) |
        (bytes[pos + 2] << 8) |
        bytes[pos + 3]) >>>
      0;
    const type = String.fromCharCode(
      bytes[pos + 4],
      bytes[pos + 5],
      bytes[pos + 6],
      bytes[pos + 7],
    );
    const data = bytes.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      width = ((data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3]) >>> 0;
      height = ((data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7]) >>> 0;
      if (data[8] !== 8 || data[9] !== 0) {
        throw new Error("only 8-bit grayscale is supported");
      }
    } else if (type === "IDAT") {
      idatParts.push(data);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const raw = inflateStored(concat(idatParts));
  const gray = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) {
      throw new Error("only filter type 0 is supported");
    }
    gray.set(
      raw.subarray(y * (width + 1) + 1, (y + 1) * (width + 1)),
      y * width,
    );
  }
  return { width, height, gray };
}
