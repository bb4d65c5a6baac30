/**
 * Reader for persisted sweep tables.
 *
 * A table is a CSV data block under five comment header lines (magic,
 * axis, master seed, config snapshot, SHA-256 digest of the data block).
 * The digest is verified before any row is returned, so a truncated or
 * hand-edited file is rejected instead of flowing silently into a figure.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export const FORMAT_MAGIC = "# pgi-sweep-table v1";

export const COLUMNS = [
  "axis_value",
  "scheme",
  "mean_sum_rate",
  "ci95",
  "trials",
  "failed_trials",
] as const;

export interface SweepRow {
  axisValue: number;
  scheme: string;
  meanSumRate: number;
  ci95: number;
  trials: number;
  failedTrials: number;
}

export interface SweepTable {
  axis: string;
  masterSeed: number;
  config: Record<string, unknown>;
  rows: SweepRow[];
  /** Where the table was read from, kept for error messages. */
  source: string;
}

export class SweepFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SweepFormatError";
  }
}

function headerValue(lines: string[], index: number, key: string): string {
  const prefix = `# ${key}: `;
  const line = lines[index];
  if (line === undefined || !line.startsWith(prefix)) {
    throw new SweepFormatError(
      `line ${index + 1} must start with ${JSON.stringify(prefix)}`,
    );
  }
  return line.slice(prefix.length);
}

function parseNumber(raw: string, what: string): number {
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    throw new SweepFormatError(`${what} is not numeric: ${JSON.stringify(raw)}`);
  }
  return value;
}

/** Parse and verify one table from its full file text. */
export function parseSweepTable(text: string, source = "<string>"): SweepTable {
  const lines = text.split("\n");
  if (lines[0] !== FORMAT_MAGIC) {
    throw new SweepFormatError(
      `${source}: missing magic line ${JSON.stringify(FORMAT_MAGIC)}`,
    );
  }
  const axis = headerValue(lines, 1, "axis");
  const masterSeed = parseNumber(headerValue(lines, 2, "master_seed"), "master_seed");
  let config: Record<string, unknown>;
  try {
    config = JSON.parse(headerValue(lines, 3, "config")) as Record<string, unknown>;
  } catch (error) {
    if (error instanceof SweepFormatError) throw error;
    throw new SweepFormatError(`${source}: config header is not valid JSON`);
  }
  const digest = headerValue(lines, 4, "digest");
  const data = lines.slice(5).join("\n");
  const actual = createHash("sha256").update(data, "utf8").digest("hex");
  if (actual !== digest) {
    throw new SweepFormatError(
      `${source}: digest mismatch; file truncated or edited`,
    );
  }
  const body = lines.slice(5).filter((line) => line !== "");
  if (body.length === 0 || body[0] !== COLUMNS.join(",")) {
    throw new SweepFormatError(
      `${source}: expected columns ${COLUMNS.join(",")}, got ${
        JSON.stringify(body[0] ?? "<empty>")
      }`,
    );
  }
  const rows: SweepRow[] = [];
  for (const line of body.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== COLUMNS.length) {
      throw new SweepFormatError(`${source}: malformed row ${JSON.stringify(line)}`);
    }
    rows.push({
      axisValue: parseNumber(parts[0], "axis_value"),
      scheme: parts[1],
      meanSumRate: parseNumber(parts[2], "mean_sum_rate"),
      ci95: parseNumber(parts[3], "ci95"),
      trials: parseNumber(parts[4], "trials"),
      failedTrials: parseNumber(parts[5], "failed_trials"),
    });
  }
  return { axis, masterSeed, config, rows, source };
}

/** Read and verify a sweep table file. */
export function readSweepTable(path: string): SweepTable {
  return parseSweepTable(readFileSync(path, "utf8"), path);
}

/** Scheme names in first-appearance order. */
export function schemes(table: SweepTable): string[] {
  const seen: string[] = [];
  for (const row of table.rows) {
    if (!seen.includes(row.scheme)) seen.push(row.scheme);
  }
  return seen;
}

/** Rows of one scheme in file order. */
export function series(table: SweepTable, scheme: string): SweepRow[] {
  const picked = table.rows.filter((row) => row.scheme === scheme);
  if (picked.length === 0) {
    throw new SweepFormatError(
      `${table.source}: scheme ${JSON.stringify(scheme)} not in table`,
    );
  }
  return picked;
}
