/**
 * Strict CSV handling for the simulator's two output schemas: the sweep
 * table (one row per grid point) and the idle-ratio table.
 */

export const SWEEP_COLUMNS = [
  "topology", "N", "M", "model", "shard_mb", "s3_read_s", "compute_s",
  "s3_write_s", "wall_clock_s", "speedup_vs_first", "puts", "gets",
  "lambda_cost", "s3_cost", "cost_per_1k", "peak_mem_mb", "feasible",
] as const;

export const IDLE_COLUMNS = ["model", "t_train_ms", "t_agg_ms", "idle_pct"] as const;

export class SchemaError extends Error {}

export interface SweepRow {
  topology: string;
  n: number;
  m: number;
  model: string;
  shardMb: number;
  s3ReadS: number | null;
  computeS: number | null;
  s3WriteS: number | null;
  wallClockS: number | null;
  speedupVsFirst: number | null;
  puts: number | null;
  gets: number | null;
  lambdaCost: number | null;
  s3Cost: number | null;
  costPer1k: number | null;
  peakMemMb: number;
  feasible: boolean;
}

export interface IdleRow {
  model: string;
  tTrainMs: number;
  tAggMs: number;
  idlePct: number;
}

function splitLines(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line) => line.split(","));
}

function checkHeader(header: string[], expected: readonly string[]): void {
  for (const column of expected) {
    if (!header.includes(column)) {
      throw new SchemaError(`input CSV is missing column '${column}'`);
    }
  }
}

function cell(row: string[], header: string[], column: string): string {
  const index = header.indexOf(column);
  const value = row[index];
  if (value === undefined) {
    throw new SchemaError(`short row: no value for column '${column}'`);
  }
  return value;
}

function num(row: string[], header: string[], column: string): number {
  const raw = cell(row, header, column);
  const value = Number(raw);
  if (raw === "" || Number.isNaN(value)) {
    throw new SchemaError(`column '${column}' has non-numeric value '${raw}'`);
  }
  return value;
}

function numOrNull(row: string[], header: string[], column: string): number | null {
  const raw = cell(row, header, column);
  if (raw === "") return null;
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new SchemaError(`column '${column}' has non-numeric value '${raw}'`);
  }
  return value;
}

export function parseSweepCsv(text: string): SweepRow[] {
  const lines = splitLines(text);
  const header = lines[0];
  if (!header) throw new SchemaError("input CSV is empty");
  checkHeader(header, SWEEP_COLUMNS);
  return lines.slice(1).map((row) => ({
    topology: cell(row, header, "topology"),
    n: num(row, header, "N"),
    m: num(row, header, "M"),
    model: cell(row, header, "model"),
    shardMb: num(row, header, "shard_mb"),
    s3ReadS: numOrNull(row, header, "s3_read_s"),
    computeS: numOrNull(row, header, "compute_s"),
    s3WriteS: numOrNull(row, header, "s3_write_s"),
    wallClockS: numOrNull(row, header, "wall_clock_s"),
    speedupVsFirst: numOrNull(row, header, "speedup_vs_first"),
    puts: numOrNull(row, header, "puts"),
    gets: numOrNull(row, header, "gets"),
    lambdaCost: numOrNull(row, header, "lambda_cost"),
    s3Cost: numOrNull(row, header, "s3_cost"),
    costPer1k: numOrNull(row, header, "cost_per_1k"),
    peakMemMb: num(row, header, "peak_mem_mb"),
    feasible: cell(row, header, "feasible") === "true",
  }));
}

export function parseIdleCsv(text: string): IdleRow[] {
  const lines = splitLines(text);
  const header = lines[0];
  if (!header) throw new SchemaError("input CSV is empty");
  checkHeader(header, IDLE_COLUMNS);
  return lines.slice(1).map((row) => ({
    model: cell(row, header, "model"),
    tTrainMs: num(row, header, "t_train_ms"),
    tAggMs: num(row, header, "t_agg_ms"),
    idlePct: num(row, header, "idle_pct"),
  }));
}
