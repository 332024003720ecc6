/** Time-lapse panels for an online run: one panel per slot showing the users
 *  observed at that slot and the UAV position, plus a final panel with the
 *  whole trajectory. */

import { loadRunDir, loadSnapshots } from "./data.js";
import { GROUP_COLORS, Scale, SvgDoc, drawAxes } from "./svg.js";

const PANEL = 240;
const MARGIN = { left: 46, right: 10, top: 22, bottom: 34 };
const COLS = 4;

export function plotTimelapse(dir: string): string {
  const run = loadRunDir(dir);
  const slots = run.trajectory.length - 1;
  const snapshots = loadSnapshots(dir, slots);
  const panels = slots + 1;                 // slots 1..N plus the final path
  const rows = Math.ceil(panels / COLS);
  const doc = new SvgDoc(COLS * PANEL, rows * PANEL);
  const radius = run.coverageRadius * 1.08;

  const panelScale = (col: number, row: number) => new Scale(
    -radius, radius, -radius, radius,
    col * PANEL + MARGIN.left, (col + 1) * PANEL - MARGIN.right,
    row * PANEL + MARGIN.top, (row + 1) * PANEL - MARGIN.bottom,
  );

  snapshots.forEach((snap, i) => {
    const col = i % COLS;
    const row = Math.floor(i / COLS);
    const scale = panelScale(col, row);
    doc.openGroup(`panel panel-slot-${snap.slot}`);
    doc.text(col * PANEL + PANEL / 2, row * PANEL + 14,
             `slot ${snap.slot}`, "font-size:11px;text-anchor:middle");
    drawAxes(doc, scale, "x (m)", "y (m)", 2);
    doc.circle(scale.x(0), scale.y(0), scale.x(run.coverageRadius) - scale.x(0),
               "fill:none;stroke:#bbb;stroke-dasharray:4 3", "coverage-disk");
    for (const u of snap.users) {
      doc.circle(scale.x(u.x), scale.y(u.y), 2.2,
                 `fill:${GROUP_COLORS[(u.group - 1) % GROUP_COLORS.length]}`,
                 `user group-${u.group}`);
    }
    doc.marker(scale.x(snap.uav.x), scale.y(snap.uav.y), "uav", "#000");
    doc.closeGroup();
  });

  const i = panels - 1;
  const scale = panelScale(i % COLS, Math.floor(i / COLS));
  doc.openGroup("panel panel-final");
  doc.text((i % COLS) * PANEL + PANEL / 2, Math.floor(i / COLS) * PANEL + 14,
           "final trajectory", "font-size:11px;text-anchor:middle");
  drawAxes(doc, scale, "x (m)", "y (m)", 2);
  doc.circle(scale.x(0), scale.y(0), scale.x(run.coverageRadius) - scale.x(0),
             "fill:none;stroke:#bbb;stroke-dasharray:4 3", "coverage-disk");
  doc.polyline(run.trajectory.map((p) => [scale.x(p.x), scale.y(p.y)]),
               "stroke:#000;stroke-width:1.6", "trajectory");
  doc.marker(scale.x(run.trajectory[0].x), scale.y(run.trajectory[0].y), "start");
  doc.marker(scale.x(run.trajectory[slots].x), scale.y(run.trajectory[slots].y), "end");
  doc.closeGroup();
  return doc.render();
}
