/** Rate curve from a sweep table: per-seed scatter plus the seed-mean line,
 *  rates shown in bits/s/Hz. */

import { SweepRow, loadSweep } from "./data.js";
import { Scale, SvgDoc, drawAxes } from "./svg.js";

const W = 640;
const H = 440;
const MARGIN = { left: 64, right: 20, top: 20, bottom: 56 };

export function plotRateCurve(sweepCsv: string): string {
  const rows = loadSweep(sweepCsv).filter((r) => r.objectiveBits !== null);
  if (rows.length === 0) {
    throw new Error(`sweep table has no successful rows: ${sweepCsv}`);
  }
  const param = rows[0].param;
  const byValue = new Map<number, number[]>();
  for (const r of rows) {
    const list = byValue.get(r.value) ?? [];
    list.push(r.objectiveBits as number);
    byValue.set(r.value, list);
  }
  const values = [...byValue.keys()].sort((a, b) => a - b);
  const means = values.map((v) => {
    const list = byValue.get(v) as number[];
    return list.reduce((s, x) => s + x, 0) / list.length;
  });

  const ys = rows.map((r) => r.objectiveBits as number);
  const ymin = Math.min(...ys);
  const ymax = Math.max(...ys);
  const ypad = Math.max(1e-6, (ymax - ymin) * 0.08);
  const xpad = Math.max(1e-6, (values[values.length - 1] - values[0]) * 0.05);
  const scale = new Scale(
    values[0] - xpad, values[values.length - 1] + xpad,
    ymin - ypad, ymax + ypad,
    MARGIN.left, W - MARGIN.right, MARGIN.top, H - MARGIN.bottom,
  );

  const doc = new SvgDoc(W, H);
  drawAxes(doc, scale, param, "total rate (bits/s/Hz)");
  doc.openGroup("seed-scatter");
  for (const r of rows) {
    doc.circle(scale.x(r.value), scale.y(r.objectiveBits as number), 2.4,
               "fill:#1f77b4;fill-opacity:0.45", "seed-point");
  }
  doc.closeGroup();
  doc.openGroup("mean-curve");
  doc.polyline(values.map((v, i) => [scale.x(v), scale.y(means[i])]),
               "stroke:#d62728;stroke-width:2", "mean");
  values.forEach((v, i) => {
    doc.circle(scale.x(v), scale.y(means[i]), 3.4, "fill:#d62728", "mean-point");
  });
  doc.closeGroup();
  return doc.render();
}
