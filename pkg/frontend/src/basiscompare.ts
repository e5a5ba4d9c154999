/**
 * Basis-comparison figure: wall error (solid) and flux defect (dashed)
 * for each auxiliary family against its size parameter, log-y.
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

export function renderBasisCompare(table: CsvTable, spec: PlotSpec): void {
  for (const c of ["basis", "size", "eps_per", "eps_flux"]) {
    if (!table.columns.includes(c)) {
      throw new FormatError(`comparison CSV lacks column '${c}'`);
    }
  }
  const sizes = numericColumn(table, "size");
  const per = numericColumn(table, "eps_per");
  const flux = numericColumn(table, "eps_flux");
  const families = [...new Set(table.rows.map((r) => r["basis"] ?? ""))];

  const series: Series[] = [];
  families.forEach((fam, fi) => {
    const idx = table.rows
      .map((r, i) => (r["basis"] === fam ? i : -1))
      .filter((i) => i >= 0);
    const color = SERIES_COLORS[fi % SERIES_COLORS.length]!;
    series.push({
      label: `${fam} eps_per`,
      xs: idx.map((i) => sizes[i]!),
      ys: idx.map((i) => per[i]!),
      color,
    });
    series.push({
      label: `${fam} eps_flux`,
      xs: idx.map((i) => sizes[i]!),
      ys: idx.map((i) => flux[i]!),
      color,
      dashed: true,
    });
  });

  const positives = series.flatMap((s) => s.ys.filter((v) => v > 0));
  if (positives.length === 0) throw new FormatError("all values non-positive");
  const [ylo, yhi] = extent(positives);

  const frame = makeFrame(spec.width, spec.height, {
    title: spec.title,
    xlabel: spec.xlabel ?? "basis size (degree p / per-side count N2)",
    ylabel: spec.ylabel ?? "error",
  });
  const x = linearScale(extent(sizes), [frame.left, frame.right]);
  const y = logScale([ylo / 3, yhi * 3], [frame.bottom, frame.top]);
  drawAxes(frame, x, y);
  for (const s of series) drawSeries(frame, x, y, s);
  drawLegend(frame, series);
  frame.save(spec.output);
}
