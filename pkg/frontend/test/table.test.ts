import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  COLUMNS,
  FORMAT_MAGIC,
  parseSweepTable,
  readSweepTable,
  schemes,
  series,
  SweepFormatError,
} from "../src/table.js";

const FIXTURES = fileURLToPath(new URL("./fixtures/", import.meta.url));

function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

/** A digest-consistent file built from arbitrary header + data lines. */
function stitch(dataLines: string[], axis = "num_bs", seed = 7): string {
  const data = dataLines.join("\n") + "\n";
  const digest = createHash("sha256").update(data, "utf8").digest("hex");
  return [
    FORMAT_MAGIC,
    `# axis: ${axis}`,
    `# master_seed: ${seed}`,
    `# config: {}`,
    `# digest: ${digest}`,
    data,
  ].join("\n");
}

describe("readSweepTable on persisted artifacts", () => {
  it("reads the station sweep with both schemes", () => {
    const table = readSweepTable(join(FIXTURES, "rate_vs_stations.csv"));
    expect(table.axis).toBe("num_bs");
    expect(table.masterSeed).toBe(111);
    expect(schemes(table)).toEqual(["proposed", "rvq_csi"]);
    expect(table.rows).toHaveLength(6);
    expect(series(table, "proposed").map((r) => r.axisValue)).toEqual([2, 5, 8]);
  });

  it("reads the budget sweep with a random-selection baseline", () => {
    const table = readSweepTable(join(FIXTURES, "rate_vs_budget.csv"));
    expect(table.axis).toBe("path_budget");
    expect(table.masterSeed).toBe(110);
    expect(schemes(table)).toContain("random_path");
    for (const row of table.rows) {
      expect(row.trials).toBe(200);
      expect(row.failedTrials).toBe(0);
      expect(row.ci95).toBeGreaterThan(0);
    }
  });

  it("reads the distortion grid with measured and analytic series", () => {
    const table = readSweepTable(join(FIXTURES, "distortion_vs_budget.csv"));
    const names = schemes(table);
    expect(names).toContain("measured_bits6");
    expect(names).toContain("closed_form_bits6");
    expect(names).toContain("full_vector_bits2");
    expect(names).toHaveLength(9);
  });

  it("reads the gap sweep and keeps config round-trippable", () => {
    const table = readSweepTable(join(FIXTURES, "rate_gap_vs_bits.csv"));
    expect(table.axis).toBe("feedback_bits");
    expect(table.config["num_bs"]).toBe(5);
    expect(schemes(table)).toEqual(["measured_gap", "gap_bound"]);
  });
});

describe("format rejection", () => {
  it("rejects a truncated file", () => {
    const text = fixtureText("rate_vs_budget.csv");
    const truncated = text.split("\n").slice(0, -2).join("\n") + "\n";
    expect(() => parseSweepTable(truncated, "cut.csv")).toThrowError(
      /digest mismatch/,
    );
  });

  it("rejects a single edited digit", () => {
    const text = fixtureText("rate_vs_stations.csv").replace("200,0", "201,0");
    expect(() => parseSweepTable(text, "edited.csv")).toThrowError(
      SweepFormatError,
    );
  });

  it("rejects a missing magic line", () => {
    expect(() => parseSweepTable("# something else v9\n")).toThrowError(/magic/);
  });

  it("rejects a file cut off inside the config header", () => {
    const text = fixtureText("rate_vs_budget.csv");
    const headCut = text.slice(0, text.indexOf('"num_bs"'));
    expect(() => parseSweepTable(headCut, "cut.csv")).toThrowError(
      /not valid JSON|must start with/,
    );
  });

  it("rejects a digest-consistent file with a wrong column set", () => {
    const text = stitch(["axis_value,scheme,mean_sum_rate,ci95,trials", "2,a,1,0,5"]);
    expect(() => parseSweepTable(text)).toThrowError(/expected columns/);
  });

  it("rejects non-numeric cells even when the digest matches", () => {
    const text = stitch([COLUMNS.join(","), "2,a,abc,0,5,0"]);
    expect(() => parseSweepTable(text)).toThrowError(/not numeric/);
  });

  it("rejects a row with too few cells", () => {
    const text = stitch([COLUMNS.join(","), "2,a,1,0,5"]);
    expect(() => parseSweepTable(text)).toThrowError(/malformed row/);
  });
});

describe("accessors", () => {
  it("keeps scheme order of first appearance", () => {
    const text = stitch([
      COLUMNS.join(","),
      "1,b,1,0,5,0",
      "1,a,2,0,5,0",
      "2,b,3,0,5,0",
      "2,a,4,0,5,0",
    ]);
    const table = parseSweepTable(text);
    expect(schemes(table)).toEqual(["b", "a"]);
    expect(series(table, "a").map((r) => r.meanSumRate)).toEqual([2, 4]);
  });

  it("raises on an unknown scheme", () => {
    const table = parseSweepTable(stitch([COLUMNS.join(","), "1,a,1,0,5,0"]));
    expect(() => series(table, "nope")).toThrowError(/not in table/);
  });
});
