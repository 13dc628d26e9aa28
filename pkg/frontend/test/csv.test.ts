import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { CsvFormatError, parseSweepCsv } from "../src/csv.js";

const fixture = (name: string) =>
  readFileSync(join(__dirname, "fixtures", name), "utf-8");

describe("parseSweepCsv", () => {
  it("parses the p-sweep fixture emitted by the toolkit", () => {
    const rows = parseSweepCsv(fixture("p_sweep.csv"));
    expect(rows).toHaveLength(26);
    expect(rows[0].sweepVar).toBe("p");
    expect(rows[0].value).toBeCloseTo(0.25, 12);
    expect(rows[25].value).toBeCloseTo(0.75, 12);
    for (const r of rows) {
      expect(r.bMi).toBeLessThanOrEqual(r.bSep);
    }
  });

  it("parses the alpha-sweep fixture", () => {
    const rows = parseSweepCsv(fixture("alpha_sweep.csv"));
    expect(rows).toHaveLength(19);
    expect(rows[0].sweepVar).toBe("alpha");
  });

  it("requires the documented header", () => {
    expect(() => parseSweepCsv("a,b,c,d\np,1,2,3\n")).toThrow(CsvFormatError);
  });

  it("rejects empty input and header-only input", () => {
    expect(() => parseSweepCsv("")).toThrow(CsvFormatError);
    expect(() => parseSweepCsv("sweep_var,value,B_MI,B_SEP\n")).toThrow(
      CsvFormatError,
    );
  });

  it("rejects non-finite values", () => {
    expect(() =>
      parseSweepCsv("sweep_var,value,B_MI,B_SEP\np,0.1,nanana,0.3\n"),
    ).toThrow(CsvFormatError);
  });

  it("rejects non-increasing sweep values", () => {
    expect(() =>
      parseSweepCsv(
        "sweep_var,value,B_MI,B_SEP\np,0.2,0.1,0.2\np,0.2,0.1,0.2\n",
      ),
    ).toThrow(/strictly increasing/);
  });

  it("rejects mixed sweep variables", () => {
    expect(() =>
      parseSweepCsv(
        "sweep_var,value,B_MI,B_SEP\np,0.1,0.1,0.2\nalpha,0.2,0.1,0.2\n",
      ),
    ).toThrow(/mixes sweep variables/);
  });

  it("rejects rows with the wrong arity", () => {
    expect(() =>
      parseSweepCsv("sweep_var,value,B_MI,B_SEP\np,0.1,0.2\n"),
    ).toThrow(CsvFormatError);
  });
});
