import { describe, expect, it } from "vitest";

import { LossChart, ProgressRecord } from "../src/lossChart.js";

function record(step: number, extra: Partial<ProgressRecord> = {}): ProgressRecord {
  return {
    step,
    phase: "cma",
    evals: step * 10,
    loss_sem: -0.1 * step,
    loss_img: 0.02 * step,
    loss_total: -0.08 * step,
    elapsed_s: 0.5 * step,
    ...extra,
  };
}

describe("loss chart", () => {
  it("collects all series including the realism proxy", () => {
    const chart = new LossChart();
    chart.append(record(1, { realism_proxy: 0.9 }));
    chart.append(record(2, { realism_proxy: 0.85 }));
    expect(chart.series("loss_sem").length).toBe(2);
    expect(chart.series("realism_proxy").map((p) => p.value)).toEqual([0.9, 0.85]);
    expect(chart.stepCount).toBe(2);
    expect(chart.phase).toBe("cma");
  });

  it("enforces monotone step indices", () => {
    const chart = new LossChart();
    chart.append(record(1));
    chart.append(record(2));
    expect(() => chart.append(record(2))).toThrow(/non-monotone/);
    expect(() => chart.append(record(1))).toThrow(/non-monotone/);
  });

  it("skips absent optional series without breaking alignment", () => {
    const chart = new LossChart();
    chart.append(record(1));
    chart.append(record(2, { realism_proxy: 0.7 }));
    expect(chart.series("loss_total").length).toBe(2);
    expect(chart.series("realism_proxy").length).toBe(1);
    expect(chart.series("realism_proxy")[0].step).toBe(2);
  });

  it("renders one polyline per populated series", () => {
    const chart = new LossChart();
    chart.append(record(1, { realism_proxy: 0.9 }));
    chart.append(record(2, { realism_proxy: 0.8 }));
    const svg = chart.renderSvg(100, 50);
    expect(svg).toContain('data-series="loss_sem"');
    expect(svg).toContain('data-series="realism_proxy"');
    expect((svg.match(/<polyline/g) ?? []).length).toBe(4);
  });

  it("renders an empty SVG before any data", () => {
    const svg = new LossChart().renderSvg();
    expect(svg).toContain("<svg");
    expect(svg).not.toContain("<polyline");
  });
});
