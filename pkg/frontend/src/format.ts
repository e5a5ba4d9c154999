/**
 * Readers for the solver's output files.
 *
 * CSV files start with two '#'-prefixed metadata lines (format version,
 * resolved config as JSON) followed by an RFC 4180 table; JSON results
 * carry a `format_version` field.  Everything here is a pure reader: it
 * validates the version tag, parses, and hands back plain objects.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export const SUPPORTED_FORMAT = "axiscat/1";

export interface CsvTable {
  /** format tag from the first comment line, e.g. "axiscat/1". */
  format: string;
  /** resolved run config embedded in the second comment line. */
  config: unknown;
  columns: string[];
  rows: Record<string, string>[];
}

export class FormatError extends Error {}

function splitMeta(text: string): { meta: string[]; body: string } {
  const meta: string[] = [];
  let rest = text;
  while (rest.startsWith("#")) {
    const nl = rest.indexOf("\n");
    if (nl < 0) {
      meta.push(rest.trimEnd());
      rest = "";
      break;
    }
    meta.push(rest.slice(0, nl).replace(/\r$/, ""));
    rest = rest.slice(nl + 1);
  }
  return { meta, body: rest };
}

/** Parse one solver CSV, enforcing the version tag. */
export function readCsv(path: string): CsvTable {
  const { meta, body } = splitMeta(readFileSync(path, "utf8"));
  const fmtLine = meta.find((m) => m.startsWith("# format:"));
  if (!fmtLine) {
    throw new FormatError(`${path}: missing '# format:' metadata line`);
  }
  const format = fmtLine.slice("# format:".length).trim();
  if (format !== SUPPORTED_FORMAT) {
    throw new FormatError(
      `${path}: format '${format}' not supported (expected '${SUPPORTED_FORMAT}')`,
    );
  }
  let config: unknown = null;
  const cfgLine = meta.find((m) => m.startsWith("# config:"));
  if (cfgLine) {
    try {
      config = JSON.parse(cfgLine.slice("# config:".length));
    } catch {
      throw new FormatError(`${path}: config metadata line is not JSON`);
    }
  }
  const parsed = Papa.parse<Record<string, string>>(body.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0]!;
    throw new FormatError(`${path}: CSV parse error: ${e.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new FormatError(`${path}: no data rows`);
  }
  return { format, config, columns, rows: parsed.data };
}

/** Read a result.json-style file, enforcing the version tag. */
export function readResultJson(path: string): Record<string, unknown> {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, "utf8"));
  } catch (e) {
    throw new FormatError(`${path}: not valid JSON: ${(e as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new FormatError(`${path}: expected a JSON object`);
  }
  const obj = doc as Record<string, unknown>;
  if (obj["format_version"] !== SUPPORTED_FORMAT) {
    throw new FormatError(
      `${path}: format_version '${String(obj["format_version"])}' not supported`,
    );
  }
  return obj;
}

/** Pull a numeric column, failing loudly on non-numeric cells. */
export function numericColumn(table: CsvTable, name: string): number[] {
  if (!table.columns.includes(name)) {
    throw new FormatError(
      `missing column '${name}' (have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r, i) => {
    const v = Number(r[name]);
    if (!Number.isFinite(v)) {
      throw new FormatError(`row ${i + 1}: column '${name}' is not a number`);
    }
    return v;
  });
}
