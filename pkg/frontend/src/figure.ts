/**
 * SVG line figures from sweep tables.
 *
 * One figure kind per swept axis; every scheme in the input tables becomes
 * one series with its 95% confidence band, analytic series (closed forms
 * and bounds) are drawn dashed without sample markers, and the axes carry
 * unit labels. Rendering is pure string building, so the same request
 * always produces the same bytes and never touches the input files.
 */

import {
  schemes,
  series,
  SweepFormatError,
  type SweepRow,
  type SweepTable,
} from "./table.js";

export type FigureKind =
  | "distortion_vs_L"
  | "rate_vs_snr"
  | "rate_vs_bits"
  | "rate_vs_L"
  | "rate_vs_P"
  | "rate_vs_M";

export const FIGURE_KINDS: FigureKind[] = [
  "distortion_vs_L",
  "rate_vs_snr",
  "rate_vs_bits",
  "rate_vs_L",
  "rate_vs_P",
  "rate_vs_M",
];

/** The sweep axis a kind expects in its input tables. */
export const KIND_AXIS: Record<FigureKind, string> = {
  distortion_vs_L: "path_budget",
  rate_vs_snr: "snr_db",
  rate_vs_bits: "feedback_bits",
  rate_vs_L: "path_budget",
  rate_vs_P: "num_paths",
  rate_vs_M: "num_bs",
};

const X_LABEL: Record<FigureKind, string> = {
  distortion_vs_L: "Selected paths per link L (count)",
  rate_vs_snr: "Downlink SNR (dB)",
  rate_vs_bits: "Feedback bits per user B (bits)",
  rate_vs_L: "Selected paths per link L (count)",
  rate_vs_P: "Paths per link P (count)",
  rate_vs_M: "Base stations M (count)",
};

const Y_LABEL: Record<FigureKind, string> = {
  distortion_vs_L: "Normalized distortion",
  rate_vs_snr: "Sum rate (bits/s/Hz)",
  rate_vs_bits: "Rate (bits/s/Hz)",
  rate_vs_L: "Sum rate (bits/s/Hz)",
  rate_vs_P: "Sum rate (bits/s/Hz)",
  rate_vs_M: "Sum rate (bits/s/Hz)",
};

const DEFAULT_TITLE: Record<FigureKind, string> = {
  distortion_vs_L: "Feedback distortion vs selected paths",
  rate_vs_snr: "Sum rate vs SNR",
  rate_vs_bits: "Rate vs feedback bits",
  rate_vs_L: "Sum rate vs selected paths",
  rate_vs_P: "Sum rate vs paths per link",
  rate_vs_M: "Sum rate vs base stations",
};

/** Closed forms and bounds: drawn dashed, no sample markers. */
const ANALYTIC_NAME = /closed|bound|full_vector/;

export interface FigurePoint {
  x: number;
  y: number;
  ci: number;
}

export interface FigureSeries {
  label: string;
  dashed: boolean;
  points: FigurePoint[];
}

function sourceStem(source: string): string {
  const base = source.split(/[\\/]/).pop() ?? source;
  return base.replace(/\.[^.]+$/, "");
}

/**
 * Flatten the tables of one figure into plottable series.
 *
 * Every table must carry the axis the kind plots; a scheme appearing in
 * several tables keeps its name unique by a source-file suffix.
 */
export function collectSeries(tables: SweepTable[], kind: FigureKind): FigureSeries[] {
  if (tables.length === 0) {
    throw new SweepFormatError(`no input tables for kind ${kind}`);
  }
  const axis = KIND_AXIS[kind];
  const out: Array<FigureSeries & { stem: string; scheme: string }> = [];
  for (const table of tables) {
    if (table.axis !== axis) {
      throw new SweepFormatError(
        `${table.source}: axis ${JSON.stringify(table.axis)} does not fit ` +
          `kind ${kind} (expects ${JSON.stringify(axis)})`,
      );
    }
    if (table.rows.length === 0) {
      throw new SweepFormatError(`${table.source}: table has no data rows`);
    }
    for (const scheme of schemes(table)) {
      const rows = [...series(table, scheme)].sort((a, b) => a.axisValue - b.axisValue);
      out.push({
        label: scheme,
        scheme,
        stem: sourceStem(table.source),
        dashed: ANALYTIC_NAME.test(scheme),
        points: rows.map((row: SweepRow) => ({
          x: row.axisValue,
          y: row.meanSumRate,
          ci: row.ci95,
        })),
      });
    }
  }
  const counts = new Map<string, number>();
  for (const entry of out) {
    counts.set(entry.scheme, (counts.get(entry.scheme) ?? 0) + 1);
  }
  for (const entry of out) {
    if ((counts.get(entry.scheme) ?? 0) > 1) {
      entry.label = `${entry.scheme} [${entry.stem}]`;
    }
  }
  return out.map(({ label, dashed, points }) => ({ label, dashed, points }));
}

/** Round tick positions covering [lo, hi] with a 1/2/2.5/5 step. */
export function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const rawStep = (hi - lo) / Math.max(1, count);
  const magnitude = 10 ** Math.floor(Math.log10(rawStep));
  let step = magnitude * 10;
  for (const mult of [1, 2, 2.5, 5, 10]) {
    if (magnitude * mult >= rawStep) {
      step = magnitude * mult;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function formatTick(value: number): string {
  return Number(value.toPrecision(10)).toString();
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { top: 46, right: 24, bottom: 58, left: 74 };

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#e377c2",
  "#7f7f7f",
];

interface Scale {
  lo: number;
  hi: number;
  toPx: (value: number) => number;
}

function linearScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const slope = (pxHi - pxLo) / (hi - lo);
  return { lo, hi, toPx: (value) => pxLo + (value - lo) * slope };
}

function pad(lo: number, hi: number, fraction: number): [number, number] {
  const span = hi > lo ? hi - lo : 1;
  return [lo - span * fraction, hi + span * fraction];
}

function fmt(px: number): string {
  return px.toFixed(2);
}

/** Render one figure to SVG text. */
export function renderFigure(
  tables: SweepTable[],
  kind: FigureKind,
  title?: string,
): string {
  const all = collectSeries(tables, kind);
  const xs = all.flatMap((s) => s.points.map((p) => p.x));
  const yLo = Math.min(...all.flatMap((s) => s.points.map((p) => p.y - p.ci)));
  const yHi = Math.max(...all.flatMap((s) => s.points.map((p) => p.y + p.ci)));
  const [xLo, xHi] = pad(Math.min(...xs), Math.max(...xs), 0.04);
  const [yLoPad, yHiPad] = pad(yLo, yHi, 0.07);
  const x = linearScale(xLo, xHi, MARGIN.left, WIDTH - MARGIN.right);
  const y = linearScale(yLoPad, yHiPad, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);

  for (const tick of niceTicks(x.lo, x.hi)) {
    const px = x.toPx(tick);
    parts.push(
      `<line x1="${fmt(px)}" y1="${MARGIN.top}" x2="${fmt(px)}" ` +
        `y2="${HEIGHT - MARGIN.bottom}" stroke="#dddddd"/>`,
      `<text x="${fmt(px)}" y="${HEIGHT - MARGIN.bottom + 20}" ` +
        `text-anchor="middle" font-size="12">${formatTick(tick)}</text>`,
    );
  }
  for (const tick of niceTicks(y.lo, y.hi)) {
    const py = y.toPx(tick);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(py)}" x2="${WIDTH - MARGIN.right}" ` +
        `y2="${fmt(py)}" stroke="#dddddd"/>`,
      `<text x="${MARGIN.left - 8}" y="${fmt(py + 4)}" text-anchor="end" ` +
        `font-size="12">${formatTick(tick)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" ` +
      `width="${WIDTH - MARGIN.left - MARGIN.right}" ` +
      `height="${HEIGHT - MARGIN.top - MARGIN.bottom}" ` +
      `fill="none" stroke="#444444"/>`,
  );

  all.forEach((entry, index) => {
    const color = PALETTE[index % PALETTE.length];
    if (entry.points.some((p) => p.ci > 0)) {
      const upper = entry.points.map(
        (p) => `${fmt(x.toPx(p.x))},${fmt(y.toPx(p.y + p.ci))}`,
      );
      const lower = [...entry.points]
        .reverse()
        .map((p) => `${fmt(x.toPx(p.x))},${fmt(y.toPx(p.y - p.ci))}`);
      parts.push(
        `<polygon points="${upper.concat(lower).join(" ")}" ` +
          `fill="${color}" fill-opacity="0.15" stroke="none"/>`,
      );
    }
    const line = entry.points
      .map((p) => `${fmt(x.toPx(p.x))},${fmt(y.toPx(p.y))}`)
      .join(" ");
    const dash = entry.dashed ? ` stroke-dasharray="7 5"` : "";
    parts.push(
      `<polyline points="${line}" fill="none" stroke="${color}" ` +
        `stroke-width="2"${dash}/>`,
    );
    if (!entry.dashed) {
      for (const p of entry.points) {
        parts.push(
          `<circle cx="${fmt(x.toPx(p.x))}" cy="${fmt(y.toPx(p.y))}" ` +
            `r="3" fill="${color}"/>`,
        );
      }
    }
  });

  const legendX = WIDTH - MARGIN.right - 230;
  all.forEach((entry, index) => {
    const color = PALETTE[index % PALETTE.length];
    const py = MARGIN.top + 16 + 18 * index;
    const dash = entry.dashed ? ` stroke-dasharray="7 5"` : "";
    parts.push(
      `<line x1="${legendX}" y1="${py}" x2="${legendX + 28}" y2="${py}" ` +
        `stroke="${color}" stroke-width="2"${dash}/>`,
      `<text x="${legendX + 34}" y="${py + 4}" font-size="12">` +
        `${escapeXml(entry.label)}</text>`,
    );
  });

  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15" ` +
      `font-weight="bold">${escapeXml(title ?? DEFAULT_TITLE[kind])}</text>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 14}" text-anchor="middle" ` +
      `font-size="13">${escapeXml(X_LABEL[kind])}</text>`,
    `<text x="20" y="${HEIGHT / 2}" text-anchor="middle" font-size="13" ` +
      `transform="rotate(-90 20 ${HEIGHT / 2})">${escapeXml(Y_LABEL[kind])}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
