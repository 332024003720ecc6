/** Readers for the engine's output files: comma-separated tables and
 *  key = value summaries. No numeric work happens here beyond parsing. */

import { readFileSync, existsSync, readdirSync } from "node:fs";
import { join } from "node:path";

export class MissingArtifactError extends Error {}

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export function readCsv(path: string): CsvTable {
  if (!existsSync(path)) {
    throw new MissingArtifactError(`missing artifact: ${path}`);
  }
  const lines = readFileSync(path, "utf-8").trim().split(/\r?\n/);
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

export function readKeyValues(path: string): Map<string, string> {
  if (!existsSync(path)) {
    throw new MissingArtifactError(`missing artifact: ${path}`);
  }
  const out = new Map<string, string>();
  for (const raw of readFileSync(path, "utf-8").split(/\r?\n/)) {
    const line = raw.split("#", 1)[0].trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) continue;
    out.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  }
  return out;
}

export interface TrajectoryPoint {
  n: number;
  x: number;
  y: number;
}

export interface UserPoint {
  slot: number;
  group: number;
  user: number;
  x: number;
  y: number;
}

export interface RunDir {
  path: string;
  summary: Map<string, string>;
  trajectory: TrajectoryPoint[];
  users: UserPoint[];
  coverageRadius: number;
  label: string;
}

export function loadRunDir(dir: string): RunDir {
  const summary = readKeyValues(join(dir, "summary.txt"));
  const traj = readCsv(join(dir, "trajectory.csv")).rows.map((r) => ({
    n: Number(r[0]),
    x: Number(r[1]),
    y: Number(r[2]),
  }));
  const users = readCsv(join(dir, "trace.csv")).rows.map((r) => ({
    slot: Number(r[0]),
    group: Number(r[1]),
    user: Number(r[2]),
    x: Number(r[3]),
    y: Number(r[4]),
  }));
  const radius = Number(summary.get("config.coverage_radius") ?? "50");
  const mode = summary.get("mode") ?? "run";
  const bits = Number(summary.get("objective_bits") ?? "0");
  return {
    path: dir,
    summary,
    trajectory: traj,
    users,
    coverageRadius: radius,
    label: `${summary.get("config.name") ?? "run"} ${mode} ${bits.toFixed(2)} bits/s/Hz`,
  };
}

export interface Snapshot {
  slot: number;
  uav: { x: number; y: number };
  users: { group: number; x: number; y: number }[];
}

export function loadSnapshots(dir: string, slots: number): Snapshot[] {
  const out: Snapshot[] = [];
  for (let n = 1; n <= slots; n++) {
    const name = `snapshot_${String(n).padStart(2, "0")}.csv`;
    const path = join(dir, name);
    if (!existsSync(path)) {
      throw new MissingArtifactError(`missing snapshot for slot ${n}: ${path}`);
    }
    const rows = readCsv(path).rows;
    const uavRow = rows.find((r) => r[0] === "uav");
    if (!uavRow) throw new MissingArtifactError(`snapshot ${name} lacks a uav row`);
    out.push({
      slot: n,
      uav: { x: Number(uavRow[3]), y: Number(uavRow[4]) },
      users: rows
        .filter((r) => r[0] === "user")
        .map((r) => ({ group: Number(r[1]), x: Number(r[3]), y: Number(r[4]) })),
    });
  }
  return out;
}

export function countSnapshots(dir: string): number {
  return readdirSync(dir).filter((f) => /^snapshot_\d+\.csv$/.test(f)).length;
}

export interface SweepRow {
  param: string;
  value: number;
  seed: number;
  objectiveBits: number | null;
}

export function loadSweep(path: string): SweepRow[] {
  const table = readCsv(path);
  if (table.rows.length === 0) {
    throw new MissingArtifactError(`sweep table is empty: ${path}`);
  }
  return table.rows.map((r) => ({
    param: r[0],
    value: Number(r[1]),
    seed: Number(r[2]),
    objectiveBits: r[4] === "" ? null : Number(r[4]),
  }));
}
