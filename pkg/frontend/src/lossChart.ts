/** Loss-trajectory chart model: per-step series for the semantic, image,
 * and total losses plus the realism proxy, appended only from stream
 * progress events. Steps must arrive in increasing order. */

export interface ProgressRecord {
  step: number;
  phase: string;
  evals: number;
  loss_sem: number;
  loss_img: number;
  loss_total: number;
  elapsed_s: number;
  realism_proxy?: number;
  preview_png_b64?: string;
}

export interface ChartPoint {
  step: number;
  value: number;
}

const SERIES = ["loss_sem", "loss_img", "loss_total", "realism_proxy"] as const;
export type SeriesName = (typeof SERIES)[number];

export class LossChart {
  private readonly points = new Map<SeriesName, ChartPoint[]>(
    SERIES.map((name) => [name, []]),
  );
  private lastStep = 0;
  phase = "";
  elapsedSeconds = 0;

  append(record: ProgressRecord): void {
    if (record.step <= this.lastStep) {
      throw new Error(
        `non-monotone step ${record.step} after ${this.lastStep}`,
      );
    }
    this.lastStep = record.step;
    this.phase = record.phase;
    this.elapsedSeconds = record.elapsed_s;
    for (const name of SERIES) {
      const value = record[name];
      if (typeof value === "number") {
        this.points.get(name)!.push({ step: record.step, value });
      }
    }
  }

  series(name: SeriesName): readonly ChartPoint[] {
    return this.points.get(name)!;
  }

  get stepCount(): number {
    return this.lastStep;
  }

  /** Polyline path ("x,y x,y ...") scaled into a width x height viewport. */
  polyline(name: SeriesName, width: number, height: number): string {
    const pts = this.points.get(name)!;
    if (pts.length === 0) return "";
    const minStep = pts[0].step;
    const maxStep = pts[pts.length - 1].step;
    let lo = Infinity;
    let hi = -Infinity;
    for (const p of pts) {
      lo = Math.min(lo, p.value);
      hi = Math.max(hi, p.value);
    }
    const spanX = Math.max(1, maxStep - minStep);
    const spanY = hi - lo || 1;
    return pts
      .map((p) => {
        const x = ((p.step - minStep) / spanX) * width;
        const y = height - ((p.value - lo) / spanY) * height;
        return `${x.toFixed(2)},${y.toFixed(2)}`;
      })
      .join(" ");
  }

  /** Standalone SVG with one polyline per non-empty series. */
  renderSvg(width = 480, height = 160): string {
    const colors: Record<SeriesName, string> = {
      loss_sem: "#d62728",
      loss_img: "#1f77b4",
      loss_total: "#2ca02c",
      realism_proxy: "#9467bd",
    };
    const lines = SERIES.filter((n) => this.points.get(n)!.length > 0)
      .map(
        (n) =>
          `<polyline fill="none" stroke="${colors[n]}" stroke-width="1.5" ` +
          `data-series="${n}" points="${this.polyline(n, width, height)}"/>`,
      )
      .join("");
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}">${lines}</svg>`
    );
  }
}
