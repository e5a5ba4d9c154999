/** Shared canvas plumbing: frame, axes, series, legend, colormap. */

import { createCanvas, type SKRSContext2D } from "@napi-rs/canvas";
import { writeFileSync } from "node:fs";
import { type Scale, tickLabel } from "./scales.js";

export interface Frame {
  ctx: SKRSContext2D;
  /** plot area in canvas pixels */
  left: number;
  top: number;
  right: number;
  bottom: number;
  save(path: string): void;
}

export const SERIES_COLORS = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

const FONT = "13px DejaVu Sans, sans-serif";
const TITLE_FONT = "15px DejaVu Sans, sans-serif";

export function makeFrame(
  width: number,
  height: number,
  opts: { title?: string; xlabel?: string; ylabel?: string },
): Frame {
  const canvas = createCanvas(width, height);
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, width, height);

  const left = 74;
  const top = opts.title ? 40 : 22;
  const right = width - 20;
  const bottom = height - 52;

  ctx.fillStyle = "#000000";
  ctx.font = TITLE_FONT;
  if (opts.title) {
    ctx.textAlign = "center";
    ctx.fillText(opts.title, (left + right) / 2, 24);
  }
  ctx.font = FONT;
  if (opts.xlabel) {
    ctx.textAlign = "center";
    ctx.fillText(opts.xlabel, (left + right) / 2, height - 12);
  }
  if (opts.ylabel) {
    ctx.save();
    ctx.translate(16, (top + bottom) / 2);
    ctx.rotate(-Math.PI / 2);
    ctx.textAlign = "center";
    ctx.fillText(opts.ylabel, 0, 0);
    ctx.restore();
  }

  return {
    ctx,
    left,
    top,
    right,
    bottom,
    save(path: string) {
      writeFileSync(path, canvas.toBuffer("image/png"));
    },
  };
}

export function drawAxes(f: Frame, x: Scale, y: Scale): void {
  const { ctx } = f;
  ctx.strokeStyle = "#000000";
  ctx.lineWidth = 1;
  ctx.strokeRect(f.left, f.top, f.right - f.left, f.bottom - f.top);

  ctx.font = FONT;
  ctx.fillStyle = "#000000";
  for (const t of x.ticks()) {
    const px = x(t);
    if (px < f.left - 0.5 || px > f.right + 0.5) continue;
    ctx.strokeStyle = "#d8d8d8";
    ctx.beginPath();
    ctx.moveTo(px, f.top);
    ctx.lineTo(px, f.bottom);
    ctx.stroke();
    ctx.strokeStyle = "#000000";
    ctx.beginPath();
    ctx.moveTo(px, f.bottom);
    ctx.lineTo(px, f.bottom + 5);
    ctx.stroke();
    ctx.textAlign = "center";
    ctx.fillText(tickLabel(t, x.log), px, f.bottom + 19);
  }
  for (const t of y.ticks()) {
    const py = y(t);
    if (py < f.top - 0.5 || py > f.bottom + 0.5) continue;
    ctx.strokeStyle = "#d8d8d8";
    ctx.beginPath();
    ctx.moveTo(f.left, py);
    ctx.lineTo(f.right, py);
    ctx.stroke();
    ctx.strokeStyle = "#000000";
    ctx.beginPath();
    ctx.moveTo(f.left - 5, py);
    ctx.lineTo(f.left, py);
    ctx.stroke();
    ctx.textAlign = "right";
    ctx.fillText(tickLabel(t, y.log), f.left - 8, py + 4);
  }
}

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  dashed?: boolean;
  markers?: boolean;
}

export function drawSeries(f: Frame, x: Scale, y: Scale, s: Series): void {
  const { ctx } = f;
  ctx.strokeStyle = s.color;
  ctx.fillStyle = s.color;
  ctx.lineWidth = 1.6;
  ctx.setLineDash(s.dashed ? [6, 4] : []);
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < s.xs.length; i++) {
    const vy = s.ys[i]!;
    if (!Number.isFinite(vy) || (y.log && vy <= 0)) {
      pen = false;
      continue;
    }
    const px = x(s.xs[i]!);
    const py = y(vy);
    if (pen) ctx.lineTo(px, py);
    else ctx.moveTo(px, py);
    pen = true;
  }
  ctx.stroke();
  ctx.setLineDash([]);
  if (s.markers !== false) {
    for (let i = 0; i < s.xs.length; i++) {
      const vy = s.ys[i]!;
      if (!Number.isFinite(vy) || (y.log && vy <= 0)) continue;
      ctx.beginPath();
      ctx.arc(x(s.xs[i]!), y(vy), 3.0, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

export function drawLegend(f: Frame, entries: Series[]): void {
  const { ctx } = f;
  ctx.font = FONT;
  let w = 0;
  for (const e of entries) w = Math.max(w, ctx.measureText(e.label).width);
  const boxW = w + 44;
  const boxH = entries.length * 18 + 10;
  const bx = f.right - boxW - 8;
  const by = f.top + 8;
  ctx.fillStyle = "rgba(255,255,255,0.88)";
  ctx.fillRect(bx, by, boxW, boxH);
  ctx.strokeStyle = "#999999";
  ctx.lineWidth = 1;
  ctx.strokeRect(bx, by, boxW, boxH);
  entries.forEach((e, i) => {
    const ly = by + 14 + i * 18;
    ctx.strokeStyle = e.color;
    ctx.lineWidth = 1.6;
    ctx.setLineDash(e.dashed ? [6, 4] : []);
    ctx.beginPath();
    ctx.moveTo(bx + 8, ly - 4);
    ctx.lineTo(bx + 32, ly - 4);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#000000";
    ctx.textAlign = "left";
    ctx.fillText(e.label, bx + 38, ly);
  });
}

/** Diverging blue-white-red map on [-1, 1]. */
export function diverging(t: number): [number, number, number] {
  const c = Math.max(-1, Math.min(1, t));
  if (c < 0) {
    const u = 1 + c; // 0 at -1, 1 at 0
    return [Math.round(59 + u * 196), Math.round(76 + u * 179), 255];
  }
  const u = 1 - c;
  return [255, Math.round(76 + u * 179), Math.round(59 + u * 196)];
}
