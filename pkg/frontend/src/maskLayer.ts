/** Brush-painted mask layer over a flat alpha buffer.
 *
 * Strokes accumulate alpha per pixel; export binarizes with the >=128 rule
 * so the uploaded mask PNG is always binary and dimension-matched to the
 * session image. Strokes are exact capsule rasterizations (pixel center
 * within `radius` of the polyline), so the same stroke script always yields
 * the same raster.
 */

import { decodeGrayPng, encodeGrayPng } from "./png.js";

export const BINARY_THRESHOLD = 128;

export interface Point {
  x: number;
  y: number;
}

function distanceToSegment(
  px: number,
  py: number,
  a: Point,
  b: Point,
): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const lengthSq = dx * dx + dy * dy;
  let t = 0;
  if (lengthSq > 0) {
    t = ((px - a.x) * dx + (py - a.y) * dy) / lengthSq;
    t = Math.max(0, Math.min(1, t));
  }
  const cx = a.x + t * dx;
  const cy = a.y + t * dy;
  return Math.hypot(px - cx, py - cy);
}

export class BrushStrokeLayer {
  readonly width: number;
  readonly height: number;
  readonly alpha: Uint8Array;
  brushRadius: number;

  constructor(width: number, height: number, brushRadius = 6) {
    if (width < 1 || height < 1) throw new Error("bad layer dims");
    this.width = width;
    this.height = height;
    this.brushRadius = brushRadius;
    this.alpha = new Uint8Array(width * height);
  }

  private applyCapsule(
    points: Point[],
    radius: number,
    apply: (index: number) => void,
  ): void {
    if (points.length === 0) return;
    const segments: Array<[Point, Point]> =
      points.length === 1
        ? [[points[0], points[0]]]
        : points.slice(1).map((p, i) => [points[i], p] as [Point, Point]);
    const xs = points.map((p) => p.x);
    const ys = points.map((p) => p.y);
    const x0 = Math.max(0, Math.floor(Math.min(...xs) - radius - 1));
    const x1 = Math.min(this.width - 1, Math.ceil(Math.max(...xs) + radius + 1));
    const y0 = Math.max(0, Math.floor(Math.min(...ys) - radius - 1));
    const y1 = Math.min(this.height - 1, Math.ceil(Math.max(...ys) + radius + 1));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const px = x + 0.5;
        const py = y + 0.5;
        for (const [a, b] of segments) {
          if (distanceToSegment(px, py, a, b) <= radius) {
            apply(y * this.width + x);
            break;
          }
        }
      }
    }
  }

  /** Paint a stroke (or a single dab for a one-point list). */
  paint(points: Point[], radius = this.brushRadius, strength = 255): void {
    this.applyCapsule(points, radius, (i) => {
      this.alpha[i] = Math.min(255, this.alpha[i] + strength);
    });
  }

  /** Erase along a stroke. */
  erase(points: Point[], radius = this.brushRadius): void {
    this.applyCapsule(points, radius, (i) => {
      this.alpha[i] = 0;
    });
  }

  clear(): void {
    this.alpha.fill(0);
  }

  /** Binary view under the >=128 rule: 255 where selected, 0 elsewhere. */
  binary(): Uint8Array {
    const out = new Uint8Array(this.alpha.length);
    for (let i = 0; i < this.alpha.length; i++) {
      out[i] = this.alpha[i] >= BINARY_THRESHOLD ? 255 : 0;
    }
    return out;
  }

  /** Fraction of selected pixels. */
  coverage(): number {
    let selected = 0;
    for (let i = 0; i < this.alpha.length; i++) {
      if (this.alpha[i] >= BINARY_THRESHOLD) selected++;
    }
    return selected / this.alpha.length;
  }

  /** Deterministic binary grayscale PNG of the current selection. */
  exportMaskPng(): Uint8Array {
    return encodeGrayPng(this.width, this.height, this.binary());
  }

  /** Load a previously exported mask back into the layer. */
  importMaskPng(bytes: Uint8Array): void {
    const img = decodeGrayPng(bytes);
    if (img.width !== this.width || img.height !== this.height) {
      throw new Error(
        `mask ${img.width}x${img.height} != layer ${this.width}x${this.height}`,
      );
    }
    for (let i = 0; i < img.gray.length; i++) {
      this.alpha[i] = img.gray[i] >= BINARY_THRESHOLD ? 255 : 0;
    }
  }
}
