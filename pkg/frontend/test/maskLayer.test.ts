import { describe, expect, it } from "vitest";

import { BrushStrokeLayer, Point } from "../src/maskLayer.js";
import { encodeGrayPng } from "../src/png.js";

/** Independent raster oracle: pixel centers within radius of a polyline. */
function referenceRaster(
  width: number,
  height: number,
  strokes: Array<{ points: Point[]; radius: number; erase?: boolean }>,
): Uint8Array {
  const out = new Uint8Array(width * height);
  const segDist = (px: number, py: number, a: Point, b: Point): number => {
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    const l2 = dx * dx + dy * dy;
    const t = l2 === 0 ? 0 : Math.max(0, Math.min(1, ((px - a.x) * dx + (py - a.y) * dy) / l2));
    return Math.hypot(px - (a.x + t * dx), py - (a.y + t * dy));
  };
  for (const stroke of strokes) {
    const pts = stroke.points.length === 1 ? [stroke.points[0], stroke.points[0]] : stroke.points;
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        for (let i = 0; i + 1 < pts.length; i++) {
          if (segDist(x + 0.5, y + 0.5, pts[i], pts[i + 1]) <= stroke.radius) {
            out[y * width + x] = stroke.erase ? 0 : 255;
            break;
          }
        }
      }
    }
  }
  return out;
}

describe("mask export fidelity (criterion 12)", () => {
  it("single click produces a filled disc of the brush radius", () => {
    const layer = new BrushStrokeLayer(64, 64);
    layer.paint([{ x: 20, y: 12 }], 5);
    const reference = referenceRaster(64, 64, [
      { points: [{ x: 20, y: 12 }], radius: 5 },
    ]);
    expect(layer.binary()).toEqual(reference);
    // every disc pixel is strictly inside radius 5 of the click
    for (let y = 0; y < 64; y++) {
      for (let x = 0; x < 64; x++) {
        const inside = Math.hypot(x + 0.5 - 20, y + 0.5 - 12) <= 5;
        expect(layer.binary()[y * 64 + x]).toBe(inside ? 255 : 0);
      }
    }
  });

  it("scripted stroke sequences match reference rasters bit-exactly as PNGs", () => {
    const scripts: Array<
      Array<{ points: Point[]; radius: number; erase?: boolean }>
    > = [
      [{ points: [{ x: 32, y: 32 }], radius: 10 }],
      [
        { points: [{ x: 5, y: 5 }, { x: 40, y: 30 }], radius: 3 },
        { points: [{ x: 40, y: 30 }, { x: 10, y: 55 }], radius: 3 },
      ],
      [
        { points: [{ x: 16, y: 16 }], radius: 8 },
        { points: [{ x: 16, y: 16 }], radius: 4, erase: true },
      ],
      [
        {
          points: [
            { x: 8.25, y: 50.75 },
            { x: 30.5, y: 12.125 },
            { x: 55.875, y: 44.5 },
          ],
          radius: 2.5,
        },
      ],
    ];
    for (const script of scripts) {
      const layer = new BrushStrokeLayer(64, 64);
      for (const stroke of script) {
        if (stroke.erase) layer.erase(stroke.points, stroke.radius);
        else layer.paint(stroke.points, stroke.radius);
      }
      const reference = referenceRaster(64, 64, script);
      expect(layer.binary()).toEqual(reference);
      expect(layer.exportMaskPng()).toEqual(encodeGrayPng(64, 64, reference));
    }
  });

  it("export is binary under the >=128 rule even for faint accumulation", () => {
    const layer = new BrushStrokeLayer(32, 32);
    layer.paint([{ x: 10, y: 10 }], 4, 60); // below threshold
    expect(layer.coverage()).toBe(0);
    layer.paint([{ x: 10, y: 10 }], 4, 60); // 120: still below
    expect(layer.coverage()).toBe(0);
    layer.paint([{ x: 10, y: 10 }], 4, 60); // 180: selected
    expect(layer.coverage()).toBeGreaterThan(0);
    for (const value of layer.binary()) expect([0, 255]).toContain(value);
  });

  it("erasing everything leaves an empty layer (submission is blocked)", () => {
    const layer = new BrushStrokeLayer(48, 48);
    layer.paint([{ x: 24, y: 24 }], 12);
    expect(layer.coverage()).toBeGreaterThan(0);
    layer.erase([{ x: 24, y: 24 }], 48);
    expect(layer.coverage()).toBe(0);
  });

  it("export/import round trip is the identity on the binary layer", () => {
    const layer = new BrushStrokeLayer(64, 64);
    layer.paint([{ x: 10, y: 40 }, { x: 50, y: 20 }], 7);
    layer.erase([{ x: 30, y: 30 }], 5);
    const exported = layer.exportMaskPng();
    const reloaded = new BrushStrokeLayer(64, 64);
    reloaded.importMaskPng(exported);
    expect(reloaded.binary()).toEqual(layer.binary());
    expect(reloaded.exportMaskPng()).toEqual(exported);
  });

  it("import rejects dimension-mismatched masks", () => {
    const layer = new BrushStrokeLayer(64, 64);
    layer.paint([{ x: 32, y: 32 }], 6);
    const small = new BrushStrokeLayer(32, 32);
    expect(() => small.importMaskPng(layer.exportMaskPng())).toThrow(/32x32/);
  });
});
