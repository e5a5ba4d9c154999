/**
 * Field-slice heatmap: re(u_t) over the sampled plane, with cells
 * inside the obstacle masked gray and a small colorbar on the right.
 */

import { type CsvTable, FormatError, numericColumn } from "./format.js";
import { type PlotSpec } from "./spec.js";
import { diverging, makeFrame } from "./draw.js";
import { linearScale, tickLabel } from "./scales.js";

function uniqueSorted(values: number[]): number[] {
  const out = [...new Set(values.map((v) => +v.toPrecision(12)))];
  out.sort((a, b) => a - b);
  return out;
}

export function renderFieldSlice(table: CsvTable, spec: PlotSpec): void {
  for (const c of ["x", "y", "z", "re_ut"]) {
    if (!table.columns.includes(c)) {
      throw new FormatError(`field CSV lacks column '${c}'`);
    }
  }
  const coords = {
    x: numericColumn(table, "x"),
    y: numericColumn(table, "y"),
    z: numericColumn(table, "z"),
  };
  // the held-fixed axis is the one with a single distinct value
  const axes = (["x", "y", "z"] as const).filter(
    (a) => uniqueSorted(coords[a]).length > 1,
  );
  if (axes.length !== 2) {
    throw new FormatError(
      `expected exactly two varying coordinates, got ${axes.length}`,
    );
  }
  const [ax1, ax2] = axes as [keyof typeof coords, keyof typeof coords];
  const u1 = uniqueSorted(coords[ax1]);
  const u2 = uniqueSorted(coords[ax2]);
  const idx1 = new Map(u1.map((v, i) => [v, i]));
  const idx2 = new Map(u2.map((v, i) => [v, i]));

  const vals = numericColumn(table, "re_ut");
  const inside = table.columns.includes("inside")
    ? numericColumn(table, "inside")
    : vals.map(() => 0);

  const grid: (number | null)[][] = u2.map(() => u1.map(() => null));
  for (let r = 0; r < vals.length; r++) {
    const i = idx1.get(+coords[ax1][r]!.toPrecision(12));
    const j = idx2.get(+coords[ax2][r]!.toPrecision(12));
    if (i === undefined || j === undefined) continue;
    grid[j]![i] = inside[r] ? null : vals[r]!;
  }

  let amp = 0;
  for (const row of grid) {
    for (const v of row) if (v !== null) amp = Math.max(amp, Math.abs(v));
  }
  if (amp === 0) throw new FormatError("field is identically zero");

  const frame = makeFrame(spec.width, spec.height, {
    title: spec.title,
    xlabel: spec.xlabel ?? ax1,
    ylabel: spec.ylabel ?? ax2,
  });
  const barW = 54;
  const plotRight = frame.right - barW;
  const x = linearScale(
    [u1[0]!, u1[u1.length - 1]!],
    [frame.left, plotRight],
  );
  const y = linearScale(
    [u2[0]!, u2[u2.length - 1]!],
    [frame.bottom, frame.top],
  );

  const { ctx } = frame;
  // cell edges at midpoints between sample coordinates
  const edges = (u: number[]) => {
    const e = [u[0]! - (u[1]! - u[0]!) / 2];
    for (let i = 0; i + 1 < u.length; i++) e.push((u[i]! + u[i + 1]!) / 2);
    e.push(u[u.length - 1]! + (u[u.length - 1]! - u[u.length - 2]!) / 2);
    return e;
  };
  const e1 = edges(u1);
  const e2 = edges(u2);
  for (let j = 0; j < u2.length; j++) {
    for (let i = 0; i < u1.length; i++) {
      const v = grid[j]![i];
      if (v == null) ctx.fillStyle = "#b0b0b0";
      else {
        const [r, g, b] = diverging(v / amp);
        ctx.fillStyle = `rgb(${r},${g},${b})`;
      }
      const px0 = x(e1[i]!);
      const px1 = x(e1[i + 1]!);
      const py0 = y(e2[j]!);
      const py1 = y(e2[j + 1]!);
      ctx.fillRect(px0, Math.min(py0, py1), px1 - px0 + 0.6,
                   Math.abs(py0 - py1) + 0.6);
    }
  }
  ctx.strokeStyle = "#000000";
  ctx.lineWidth = 1;
  ctx.strokeRect(frame.left, frame.top, plotRight - frame.left,
                 frame.bottom - frame.top);

  ctx.font = "12px DejaVu Sans, sans-serif";
  ctx.fillStyle = "#000000";
  for (const [u, sc, horiz] of [
    [u1, x, true],
    [u2, y, false],
  ] as const) {
    const lin = linearScale([u[0]!, u[u.length - 1]!], [0, 1]);
    for (const t of lin.ticks()) {
      if (t < u[0]! || t > u[u.length - 1]!) continue;
      const p = sc(t);
      ctx.textAlign = horiz ? "center" : "right";
      if (horiz) ctx.fillText(tickLabel(t, false), p, frame.bottom + 16);
      else ctx.fillText(tickLabel(t, false), frame.left - 6, p + 4);
    }
  }

  // colorbar
  const bx = plotRight + 14;
  for (let py = frame.top; py <= frame.bottom; py++) {
    const t = 1 - (2 * (py - frame.top)) / (frame.bottom - frame.top);
    const [r, g, b] = diverging(t);
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fillRect(bx, py, 16, 1.2);
  }
  ctx.strokeRect(bx, frame.top, 16, frame.bottom - frame.top);
  ctx.textAlign = "left";
  ctx.fillText(amp.toPrecision(3), bx + 20, frame.top + 5);
  ctx.fillText("0", bx + 20, (frame.top + frame.bottom) / 2 + 4);
  ctx.fillText((-amp).toPrecision(3), bx + 20, frame.bottom + 4);

  frame.save(spec.output);
}
