#!/usr/bin/env node
/**
 * Figure generator for solver outputs.
 *
 * Two entry styles:
 *   axiscat-plots spec figure.json          # declarative spec file
 *   axiscat-plots convergence --in scan.csv --out fig.png [--rate a]
 *   axiscat-plots field-slice --in field.csv --out fig.png
 *   axiscat-plots basis-compare --in cmp.csv --out fig.png
 *
 * Scripts are pure readers: they never invoke the solver, and they exit
 * nonzero on a format-version mismatch or a malformed table.
 */

import { readFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { readCsv } from "./format.js";
import { type PlotSpec, parseSpec } from "./spec.js";
import { renderConvergence } from "./convergence.js";
import { renderFieldSlice } from "./fieldslice.js";
import { renderBasisCompare } from "./basiscompare.js";

export function renderFromSpec(spec: PlotSpec): void {
  const table = readCsv(spec.input);
  if (spec.kind === "convergence") renderConvergence(table, spec);
  else if (spec.kind === "field_slice") renderFieldSlice(table, spec);
  else renderBasisCompare(table, spec);
}

type Flags = {
  in: string;
  out: string;
  title?: string;
  xlabel?: string;
  ylabel?: string;
  rate?: number;
  series?: string;
  logx?: boolean;
  width?: number;
  height?: number;
};

function specFromFlags(kind: PlotSpec["kind"], f: Flags): PlotSpec {
  return parseSpec({
    kind,
    input: f.in,
    output: f.out,
    ...(f.title !== undefined && { title: f.title }),
    ...(f.xlabel !== undefined && { xlabel: f.xlabel }),
    ...(f.ylabel !== undefined && { ylabel: f.ylabel }),
    ...(f.rate !== undefined && { rate: f.rate }),
    ...(f.series !== undefined && {
      series: f.series.split(",").filter((s) => s.length),
    }),
    ...(f.logx !== undefined && { logx: f.logx }),
    ...(f.width !== undefined && { width: f.width }),
    ...(f.height !== undefined && { height: f.height }),
  });
}

const ioFlags = {
  in: { type: "string", demandOption: true, describe: "input CSV" },
  out: { type: "string", demandOption: true, describe: "output PNG" },
  title: { type: "string" },
  xlabel: { type: "string" },
  ylabel: { type: "string" },
  width: { type: "number" },
  height: { type: "number" },
} as const;

export function main(argv: string[]): number {
  try {
    yargs(argv)
      .scriptName("axiscat-plots")
      .command(
        "spec <file>",
        "render a figure described by a JSON plot spec",
        (y) => y.positional("file", { type: "string", demandOption: true }),
        (a) => {
          const doc: unknown = JSON.parse(readFileSync(a.file!, "utf8"));
          renderFromSpec(parseSpec(doc));
        },
      )
      .command(
        "convergence",
        "semilog error-vs-parameter curves from a scan CSV",
        {
          ...ioFlags,
          rate: {
            type: "number",
            describe: "overlay exp(-rate x) anchored at the first point",
          },
          series: {
            type: "string",
            describe: "comma-separated error columns (default: autodetect)",
          },
          logx: { type: "boolean", default: false },
        },
        (a) => renderFromSpec(specFromFlags("convergence", a as Flags)),
      )
      .command(
        "field-slice",
        "heatmap of re(u_t) from a field CSV",
        ioFlags,
        (a) => renderFromSpec(specFromFlags("field_slice", a as Flags)),
      )
      .command(
        "basis-compare",
        "wall/flux error curves per auxiliary family",
        ioFlags,
        (a) => renderFromSpec(specFromFlags("basis_compare", a as Flags)),
      )
      .demandCommand(1)
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync();
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("axiscat-plots")) {
  process.exit(main(hideBin(process.argv)));
}
