#!/usr/bin/env node
/**
 * Batch figure rendering:
 *
 *   pgi-render --in <table.csv> [--in <more.csv>] --kind <kind> --out <figure.svg>
 *
 * Inputs are verified (format magic, schema, content digest) before any
 * drawing happens and are never written to; the output file is written in
 * one shot only after the whole figure rendered, so a failing input leaves
 * no partial artifact behind.
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { FIGURE_KINDS, renderFigure, type FigureKind } from "./figure.js";
import { readSweepTable, SweepFormatError } from "./table.js";

export interface RenderRequest {
  inputs: string[];
  kind: FigureKind;
  out: string;
  title?: string;
}

export function parseCliArgs(argv: string[]): RenderRequest {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: "string", multiple: true },
      kind: { type: "string" },
      out: { type: "string" },
      title: { type: "string" },
    },
    allowPositionals: false,
  });
  const inputs = values.in ?? [];
  if (inputs.length === 0) {
    throw new Error("at least one --in table is required");
  }
  if (!values.kind || !(FIGURE_KINDS as string[]).includes(values.kind)) {
    throw new Error(
      `--kind must be one of ${FIGURE_KINDS.join(", ")} (got ${values.kind ?? "nothing"})`,
    );
  }
  if (!values.out) {
    throw new Error("--out <figure.svg> is required");
  }
  return {
    inputs,
    kind: values.kind as FigureKind,
    out: values.out,
    title: values.title,
  };
}

/** Render one request to its output file; returns the SVG text. */
export function runRender(request: RenderRequest): string {
  const tables = request.inputs.map(readSweepTable);
  const svg = renderFigure(tables, request.kind, request.title);
  writeFileSync(request.out, svg);
  return svg;
}

export function main(argv: string[]): number {
  let request: RenderRequest;
  try {
    request = parseCliArgs(argv);
  } catch (error) {
    console.error(`pgi-render: ${(error as Error).message}`);
    return 2;
  }
  try {
    runRender(request);
  } catch (error) {
    if (error instanceof SweepFormatError) {
      console.error(`pgi-render: ${error.message}`);
      return 1;
    }
    console.error(`pgi-render: ${(error as Error).message}`);
    return 1;
  }
  console.log(`wrote ${request.out}`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
