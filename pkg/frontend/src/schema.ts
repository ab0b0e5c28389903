/**
 * Readers for the simulation output formats.
 *
 * The run-record CSV schema is fixed:
 *   t, l1, l2, linf, h1, hneg1, w14, uinf, duinf, lambda0, supp_r,
 *   dphi_norm_seed_{i} ...
 * Readers check the header verbatim and refuse files that do not conform.
 */

import { readFileSync } from "fs";

export const BASE_COLUMNS = [
  "t", "l1", "l2", "linf", "h1", "hneg1", "w14", "uinf", "duinf",
  "lambda0", "supp_r",
] as const;

export interface RunRecord {
  columns: string[];
  rows: number[][];
  seedCount: number;
}

export class SchemaMismatch extends Error {}

export function readRunRecordCsv(path: string): RunRecord {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new SchemaMismatch(`${path}: empty file`);
  const header = lines[0].split(",");
  for (let i = 0; i < BASE_COLUMNS.length; i++) {
    if (header[i] !== BASE_COLUMNS[i]) {
      throw new SchemaMismatch(
        `${path}: column ${i} is ${header[i]}, expected ${BASE_COLUMNS[i]}`,
      );
    }
  }
  let seedCount = 0;
  for (let i = BASE_COLUMNS.length; i < header.length; i++) {
    if (header[i] !== `dphi_norm_seed_${seedCount}`) {
      throw new SchemaMismatch(`${path}: unexpected column ${header[i]}`);
    }
    seedCount++;
  }
  const rows = lines.slice(1).map((line) => line.split(",").map(Number));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new SchemaMismatch(`${path}: ragged row of width ${row.length}`);
    }
  }
  return { columns: header, rows, seedCount };
}

export function column(rec: RunRecord, name: string): number[] {
  const idx = rec.columns.indexOf(name);
  if (idx < 0) throw new SchemaMismatch(`no column ${name}`);
  return rec.rows.map((r) => r[idx]);
}

export interface GrowthRow {
  A: number;
  G: number;
  C_emp: number;
  max_dphi: number;
  lambda0: number;
}

export function readGrowthCsv(path: string): GrowthRow[] {
  const lines = readFileSync(path, "utf8").split("\n").filter((l) => l.trim());
  const header = lines[0].split(",");
  const expect = ["A", "G", "C_emp", "max_dphi", "lambda0"];
  if (header.join(",") !== expect.join(",")) {
    throw new SchemaMismatch(`${path}: header ${header.join(",")}`);
  }
  return lines.slice(1).map((line) => {
    const [A, G, C_emp, max_dphi, lambda0] = line.split(",").map(Number);
    return { A, G, C_emp, max_dphi, lambda0 };
  });
}

export interface GronwallTable {
  G: number;
  C_emp: number;
  t: number[];
  lhs: number[];
  rhs: number[];
  max_dphi: number[];
}

export interface LldReport {
  growth_curve: { A: number[]; G: number[]; C_emp: number[]; max_dphi: number[] };
  gronwall: Record<string, GronwallTable>;
}

export interface InflateSetting {
  t0: number;
  L: number;
  ratio: number;
  times: number[];
  h1_perturbed_series: number[];
  h1_base_series: number[];
  lagrangian_reconstruction: number;
  eulerian_h1_sq: number;
  probe_fraction: number;
}

export interface InflateReport {
  settings: InflateSetting[];
  L_values: number[];
  ratios: number[];
}

export interface FitInfo {
  exponent: number;
  prefactor: number;
  x: number[];
  y: number[];
}

export interface PatchReport {
  separations: number[];
  per_separation: Record<string, { max_l2: number; max_h2: number }>;
  l2_fit: FitInfo;
  h2_fit: FitInfo;
}

export function readJson<T>(path: string): T {
  return JSON.parse(readFileSync(path, "utf8")) as T;
}
