/**
 * Parsing and validation of the sweep CSV emitted by the verification
 * toolkit: header `sweep_var,value,B_MI,B_SEP`, finite values, sweep
 * values strictly increasing, one sweep variable per file.
 */

import Papa from "papaparse";

export interface SweepRow {
  sweepVar: string;
  value: number;
  bMi: number;
  bSep: number;
}

export class CsvFormatError extends Error {}

const HEADER = ["sweep_var", "value", "B_MI", "B_SEP"];

export function parseSweepCsv(text: string): SweepRow[] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new CsvFormatError(`malformed CSV: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new CsvFormatError("empty CSV");
  }
  const header = rows[0].map((h) => h.trim());
  if (header.length !== HEADER.length || header.some((h, i) => h !== HEADER[i])) {
    throw new CsvFormatError(
      `expected header ${HEADER.join(",")}, got ${header.join(",")}`,
    );
  }
  if (rows.length < 2) {
    throw new CsvFormatError("CSV has a header but no data rows");
  }
  const out: SweepRow[] = [];
  for (const [index, raw] of rows.slice(1).entries()) {
    if (raw.length !== 4) {
      throw new CsvFormatError(`row ${index + 2} has ${raw.length} fields, expected 4`);
    }
    const [sweepVar, valueS, bMiS, bSepS] = raw.map((f) => f.trim());
    const value = Number(valueS);
    const bMi = Number(bMiS);
    const bSep = Number(bSepS);
    for (const [name, x] of [
      ["value", value],
      ["B_MI", bMi],
      ["B_SEP", bSep],
    ] as const) {
      if (!Number.isFinite(x)) {
        throw new CsvFormatError(`row ${index + 2}: ${name} is not a finite number`);
      }
    }
    out.push({ sweepVar, value, bMi, bSep });
  }
  const names = new Set(out.map((r) => r.sweepVar));
  if (names.size !== 1) {
    throw new CsvFormatError(`CSV mixes sweep variables: ${[...names].join(", ")}`);
  }
  for (let i = 1; i < out.length; i++) {
    if (!(out[i].value > out[i - 1].value)) {
      throw new CsvFormatError(
        `sweep values must be strictly increasing (row ${i + 2})`,
      );
    }
  }
  return out;
}
