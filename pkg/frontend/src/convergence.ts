/**
 * Convergence figure: error columns of a scan CSV against the swept
 * parameter, semilog-y, with an optional exp(-alpha x) reference line
 * anchored at the first data point of the first series.
 */

import { type CsvTable, FormatError, numericColumn } from "./format.js";
import { type PlotSpec } from "./spec.js";
import {
  SERIES_COLORS,
  type Series,
  drawAxes,
  drawLegend,
  drawSeries,
  makeFrame,
} from "./draw.js";
import { extent, linearScale, logScale } from "./scales.js";

const DEFAULT_SERIES = ["eps_bc", "eps_per", "eps_flux", "err", "error"];

export function renderConvergence(table: CsvTable, spec: PlotSpec): void {
  const xcol = table.columns.includes("value") ? "value" : table.columns[0]!;
  const xs = numericColumn(table, xcol);

  const wanted =
    spec.series ?? DEFAULT_SERIES.filter((c) => table.columns.includes(c));
  if (wanted.length === 0) {
    throw new FormatError(
      `no error columns found (have: ${table.columns.join(", ")})`,
    );
  }

  const series: Series[] = wanted.map((name, i) => ({
    label: name,
    xs,
    ys: numericColumn(table, name),
    color: SERIES_COLORS[i % SERIES_COLORS.length]!,
  }));

  const positives = series.flatMap((s) => s.ys.filter((v) => v > 0));
  if (positives.length === 0) throw new FormatError("all values non-positive");
  const [ylo, yhi] = extent(positives);

  const param =
    typeof (table.config as { param?: unknown })?.["param"] === "string"
      ? String((table.config as { param: string }).param)
      : xcol;
  const frame = makeFrame(spec.width, spec.height, {
    title: spec.title,
    xlabel: spec.xlabel ?? param,
    ylabel: spec.ylabel ?? "error",
  });
  const xdom = extent(xs);
  const x = spec.logx
    ? logScale(xdom, [frame.left, frame.right])
    : linearScale(xdom, [frame.left, frame.right]);
  const y = logScale(
    [ylo / 3, yhi * 3],
    [frame.bottom, frame.top],
  );
  drawAxes(frame, x, y);

  if (spec.rate !== undefined) {
    const s0 = series[0]!;
    const i0 = s0.ys.findIndex((v) => v > 0);
    const xline = xs;
    const yline = xline.map(
      (v) => s0.ys[i0]! * Math.exp(-spec.rate! * (v - xline[i0]!)),
    );
    drawSeries(frame, x, y, {
      label: `exp(-${spec.rate} x)`,
      xs: xline,
      ys: yline,
      color: "#777777",
      dashed: true,
      markers: false,
    });
    series.push({
      label: `exp(-${spec.rate} x)`,
      xs: [],
      ys: [],
      color: "#777777",
      dashed: true,
    });
  }
  for (const s of series) {
    if (s.xs.length) drawSeries(frame, x, y, s);
  }
  drawLegend(frame, series);
  frame.save(spec.output);
}
