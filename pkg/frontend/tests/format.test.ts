import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { FormatError, numericColumn, readCsv, readResultJson }
  from "../src/format.js";

const dir = mkdtempSync(join(tmpdir(), "plots-fmt-"));

function csvFile(name: string, text: string): string {
  const p = join(dir, name);
  writeFileSync(p, text);
  return p;
}

const GOOD = [
  "# format: axiscat/1",
  '# config: {"param": "p"}',
  "param,value,eps_per",
  "p,8,1.0e-3",
  "p,16,2.5e-6",
  "p,24,4.0e-9",
  "",
].join("\r\n");

describe("readCsv", () => {
  it("parses metadata, columns, and rows", () => {
    const t = readCsv(csvFile("good.csv", GOOD));
    expect(t.format).toBe("axiscat/1");
    expect(t.config).toEqual({ param: "p" });
    expect(t.columns).toEqual(["param", "value", "eps_per"]);
    expect(t.rows).toHaveLength(3);
    expect(t.rows[2]!["eps_per"]).toBe("4.0e-9");
  });

  it("rejects a missing format line", () => {
    expect(() => readCsv(csvFile("nofmt.csv", "a,b\n1,2\n")))
      .toThrow(FormatError);
  });

  it("rejects an unsupported version", () => {
    const bad = GOOD.replace("axiscat/1", "axiscat/999");
    expect(() => readCsv(csvFile("badver.csv", bad)))
      .toThrow(/not supported/);
  });

  it("rejects an empty table", () => {
    const empty = "# format: axiscat/1\r\n# config: {}\r\nparam,value\r\n";
    expect(() => readCsv(csvFile("empty.csv", empty))).toThrow(/no data/);
  });
});

describe("numericColumn", () => {
  const t = readCsv(csvFile("good2.csv", GOOD));
  it("extracts numbers", () => {
    expect(numericColumn(t, "value")).toEqual([8, 16, 24]);
  });
  it("names a missing column", () => {
    expect(() => numericColumn(t, "nope")).toThrow(/missing column 'nope'/);
  });
  it("flags junk cells", () => {
    const bad = GOOD.replace("2.5e-6", "oops");
    const tb = readCsv(csvFile("junk.csv", bad));
    expect(() => numericColumn(tb, "eps_per")).toThrow(/not a number/);
  });
});

describe("readResultJson", () => {
  it("accepts the current version", () => {
    const p = csvFile("r.json",
      JSON.stringify({ format_version: "axiscat/1", iterations: 13 }));
    expect(readResultJson(p)["iterations"]).toBe(13);
  });
  it("rejects others", () => {
    const p = csvFile("r2.json", JSON.stringify({ format_version: "x/0" }));
    expect(() => readResultJson(p)).toThrow(FormatError);
  });
});
