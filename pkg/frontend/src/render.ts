/**
 * Deterministic SVG rendering of a two-curve comparison panel. No DOM, no
 * canvas: the chart is assembled as a string so identical input bytes give
 * identical output bytes.
 */

import { SweepRow } from "./csv.js";

export interface PanelOptions {
  width?: number;
  height?: number;
}

const MARGIN = { top: 48, right: 24, bottom: 56, left: 72 };
const SERIES = [
  { key: "bMi" as const, label: "B_MI", color: "#1f77b4" },
  { key: "bSep" as const, label: "B_SEP", color: "#ff7f0e" },
];

const AXIS_LABELS: Record<string, string> = {
  p: "prior probability p",
  alpha: "sub-Gaussianity parameter alpha",
};

function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const rawStep = span / Math.max(count - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

function fmt(x: number): string {
  return Number(x.toPrecision(6)).toString();
}

export function renderPanelSvg(rows: SweepRow[], options: PanelOptions = {}): string {
  if (rows.length === 0) {
    throw new Error("nothing to plot");
  }
  const width = options.width ?? 720;
  const height = options.height ?? 480;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = rows.map((r) => r.value);
  const ys = rows.flatMap((r) => [r.bMi, r.bSep]);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(0, ...ys);
  const yHi = Math.max(...ys) * 1.05;

  const sx = (v: number) =>
    MARGIN.left + ((v - xLo) / (xHi - xLo || 1)) * plotW;
  const sy = (v: number) =>
    MARGIN.top + plotH - ((v - yLo) / (yHi - yLo || 1)) * plotH;

  const sweepVar = rows[0].sweepVar;
  const xLabel = AXIS_LABELS[sweepVar] ?? sweepVar;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">Generalization bound comparison (${sweepVar}-sweep)</text>`,
  );

  // axes
  const x0 = MARGIN.left;
  const y0 = MARGIN.top + plotH;
  parts.push(
    `<line x1="${x0}" y1="${y0}" x2="${x0 + plotW}" y2="${y0}" stroke="black" stroke-width="1"/>`,
  );
  parts.push(
    `<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${y0}" stroke="black" stroke-width="1"/>`,
  );
  for (const t of niceTicks(xLo, xHi)) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">${fmt(t)}</text>`,
    );
  }
  for (const t of niceTicks(yLo, yHi)) {
    const py = sy(t);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${py + 4}" text-anchor="end" font-family="sans-serif" font-size="12">${fmt(t)}</text>`,
    );
    parts.push(
      `<line x1="${x0}" y1="${py}" x2="${x0 + plotW}" y2="${py}" stroke="#dddddd" stroke-width="0.5"/>`,
    );
  }
  parts.push(
    `<text x="${x0 + plotW / 2}" y="${height - 12}" text-anchor="middle" font-family="sans-serif" font-size="14">${xLabel}</text>`,
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">bound value</text>`,
  );

  // curves with point markers
  for (const series of SERIES) {
    const points = rows
      .map((r) => `${fmt(sx(r.value))},${fmt(sy(r[series.key]))}`)
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="${series.color}" stroke-width="2" points="${points}" data-series="${series.label}"/>`,
    );
    for (const r of rows) {
      parts.push(
        `<circle cx="${fmt(sx(r.value))}" cy="${fmt(sy(r[series.key]))}" r="2.5" fill="${series.color}"/>`,
      );
    }
  }

  // legend
  const lx = x0 + plotW - 140;
  const ly = MARGIN.top + 10;
  parts.push(
    `<rect x="${lx - 10}" y="${ly - 16}" width="140" height="52" fill="white" stroke="#999999"/>`,
  );
  SERIES.forEach((series, i) => {
    const yy = ly + i * 22;
    parts.push(
      `<line x1="${lx}" y1="${yy}" x2="${lx + 28}" y2="${yy}" stroke="${series.color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${lx + 36}" y="${yy + 4}" font-family="sans-serif" font-size="13">${series.label}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
