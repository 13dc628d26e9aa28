#!/usr/bin/env node
/**
 * render <in.csv> <out.svg>
 *
 * Reads one sweep CSV produced by the verification toolkit and writes the
 * corresponding comparison panel. Output format follows the extension;
 * only SVG is supported in this environment (no native canvas), so a .png
 * target is rejected with a clear message.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { extname } from "node:path";

import { CsvFormatError, parseSweepCsv } from "./csv.js";
import { renderPanelSvg } from "./render.js";

export function run(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: render <in.csv> <out.svg>");
    return 1;
  }
  const [input, output] = argv;
  const ext = extname(output).toLowerCase();
  if (ext !== ".svg") {
    console.error(
      `unsupported output extension '${ext}': this renderer emits vector SVG only`,
    );
    return 1;
  }
  let text: string;
  try {
    text = readFileSync(input, "utf-8");
  } catch (err) {
    console.error(`cannot read ${input}: ${(err as Error).message}`);
    return 1;
  }
  try {
    const rows = parseSweepCsv(text);
    writeFileSync(output, renderPanelSvg(rows), "utf-8");
  } catch (err) {
    if (err instanceof CsvFormatError) {
      console.error(`invalid sweep CSV: ${err.message}`);
      return 1;
    }
    throw err;
  }
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("qpg-render")) {
  process.exit(run(process.argv.slice(2)));
}
