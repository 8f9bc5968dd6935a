import { inflateSync } from "node:zlib";

import { describe, expect, it } from "vitest";

import { adler32, crc32, decodeGrayPng, encodeGrayPng } from "../src/png.js";

function patterned(width: number, height: number): Uint8Array {
  const gray = new Uint8Array(width * height);
  for (let i = 0; i < gray.length; i++) gray[i] = (i * 37 + 11) % 256;
  return gray;
}

describe("checksums", () => {
  it("crc32 matches known vectors", () => {
    expect(crc32(new TextEncoder().encode(""))).toBe(0);
    expect(crc32(new TextEncoder().encode("123456789"))).toBe(0xcbf43926);
  });

  it("adler32 matches known vectors", () => {
    expect(adler32(new TextEncoder().encode(""))).toBe(1);
    expect(adler32(new TextEncoder().encode("Wikipedia"))).toBe(0x11e60398);
  });
});

describe("grayscale PNG codec", () => {
  it("encodes a standards-valid zlib stream (node inflate agrees)", () => {
    const width = 64;
    const height = 48;
    const gray = patterned(width, height);
    const png = encodeGrayPng(width, height, gray);
    // locate the IDAT chunk and inflate with node's zlib
    let pos = 8;
    let idat: Uint8Array | null = null;
    while (pos < png.length) {
      const len =
        ((png[pos] << 24) | (png[pos + 1] << 16) | (png[pos + 2] << 8) | png[pos + 3]) >>> 0;
      const type = String.fromCharCode(png[pos + 4], png[pos + 5], png[pos + 6], png[pos + 7]);
      if (type === "IDAT") idat = png.subarray(pos + 8, pos + 8 + len);
      pos += 12 + len;
    }
    expect(idat).not.toBeNull();
    const raw = inflateSync(Buffer.from(idat!));
    expect(raw.length).toBe(height * (width + 1));
    for (let y = 0; y < height; y++) {
      expect(raw[y * (width + 1)]).toBe(0);
      expect(new Uint8Array(raw.subarray(y * (width + 1) + 1, (y + 1) * (width + 1)))).toEqual(
        gray.subarray(y * width, (y + 1) * width),
      );
    }
  });

  it("round trips through its own decoder", () => {
    const gray = patterned(33, 21); // odd dims exercise row boundaries
    const png = encodeGrayPng(33, 21, gray);
    const decoded = decodeGrayPng(png);
    expect(decoded.width).toBe(33);
    expect(decoded.height).toBe(21);
    expect(decoded.gray).toEqual(gray);
  });

  it("is deterministic: same pixels, same bytes", () => {
    const gray = patterned(64, 64);
    expect(encodeGrayPng(64, 64, gray)).toEqual(encodeGrayPng(64, 64, gray));
  });

  it("handles payloads larger than one stored deflate block", () => {
    const width = 300;
    const height = 260; // raw size 300*261 > 65535 forces multiple blocks
    const gray = patterned(width, height);
    const decoded = decodeGrayPng(encodeGrayPng(width, height, gray));
    expect(decoded.gray).toEqual(gray);
  });

  it("rejects malformed input", () => {
    expect(() => encodeGrayPng(8, 8, new Uint8Array(3))).toThrow(/8x8/);
    expect(() => decodeGrayPng(new Uint8Array([1, 2, 3]))).toThrow(/not a PNG/);
  });
});
