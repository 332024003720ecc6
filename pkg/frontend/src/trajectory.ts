/** Trajectory overlay: coverage disk, start/end markers, per-group user
 *  markers, one polyline per result directory, legend from run summaries. */

import { RunDir, loadRunDir } from "./data.js";
import { GROUP_COLORS, RUN_COLORS, Scale, SvgDoc, drawAxes } from "./svg.js";

const W = 640;
const H = 560;
const MARGIN = { left: 60, right: 20, top: 20, bottom: 50 };

export function plotTrajectory(dirs: string[]): string {
  const runs: RunDir[] = dirs.map(loadRunDir);
  const radius = Math.max(...runs.map((r) => r.coverageRadius));
  const pad = radius * 0.08;
  const scale = new Scale(
    -radius - pad, radius + pad, -radius - pad, radius + pad,
    MARGIN.left, W - MARGIN.right, MARGIN.top, H - MARGIN.bottom - 60,
  );

  const doc = new SvgDoc(W, H);
  drawAxes(doc, scale, "x (m)", "y (m)");
  doc.circle(scale.x(0), scale.y(0),
             (scale.x(radius) - scale.x(0)),
             "fill:none;stroke:#999;stroke-dasharray:6 4", "coverage-disk");

  // user markers from the first run's slot-1 observations (shared geometry)
  doc.openGroup("users");
  for (const u of runs[0].users.filter((u) => u.slot === 1)) {
    doc.circle(scale.x(u.x), scale.y(u.y), 3.2,
               `fill:${GROUP_COLORS[(u.group - 1) % GROUP_COLORS.length]}`,
               `user group-${u.group}`);
  }
  doc.closeGroup();

  runs.forEach((run, i) => {
    const color = RUN_COLORS[i % RUN_COLORS.length];
    doc.openGroup(`run run-${i}`);
    doc.polyline(run.trajectory.map((p) => [scale.x(p.x), scale.y(p.y)]),
                 `stroke:${color};stroke-width:1.8`, "trajectory");
    for (const p of run.trajectory) {
      doc.circle(scale.x(p.x), scale.y(p.y), 2.2, `fill:${color}`, "breaking-point");
    }
    doc.closeGroup();
  });

  const first = runs[0].trajectory[0];
  const last = runs[0].trajectory[runs[0].trajectory.length - 1];
  doc.marker(scale.x(first.x), scale.y(first.y), "start");
  doc.marker(scale.x(last.x), scale.y(last.y), "end");

  doc.openGroup("legend");
  runs.forEach((run, i) => {
    const y = H - MARGIN.bottom - 40 + 14 * i;
    const color = RUN_COLORS[i % RUN_COLORS.length];
    doc.line(MARGIN.left, y - 4, MARGIN.left + 24, y - 4, `stroke:${color};stroke-width:2`);
    doc.text(MARGIN.left + 30, y, run.label, "font-size:11px");
  });
  doc.closeGroup();
  return doc.render();
}
