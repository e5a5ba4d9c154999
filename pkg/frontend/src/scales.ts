/** Linear and log10 axis scales with tick generation. */

export interface Scale {
  (v: number): number;
  ticks(): number[];
  domain: [number, number];
  range: [number, number];
  log: boolean;
}

function niceStep(span: number, target: number): number {
  const raw = span / Math.max(target, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= raw) return mag * m;
  }
  return mag * 10;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
  tickTarget = 6,
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.ticks = () => {
    const step = niceStep(Math.abs(span), tickTarget);
    const first = Math.ceil(Math.min(d0, d1) / step) * step;
    const out: number[] = [];
    for (let t = first; t <= Math.max(d0, d1) + 1e-12 * Math.abs(span); t += step) {
      out.push(Math.abs(t) < step * 1e-9 ? 0 : t);
    }
    return out;
  };
  f.domain = domain;
  f.range = range;
  f.log = false;
  return f;
}

export function logScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) {
    throw new Error(`log scale needs positive domain, got [${d0}, ${d1}]`);
  }
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const [r0, r1] = range;
  const span = l1 - l0 || 1;
  const f = ((v: number) =>
    r0 + ((Math.log10(v) - l0) / span) * (r1 - r0)) as Scale;
  f.ticks = () => {
    const lo = Math.ceil(Math.min(l0, l1) - 1e-9);
    const hi = Math.floor(Math.max(l0, l1) + 1e-9);
    const out: number[] = [];
    // thin decade labels when the range is tall
    const stride = Math.max(1, Math.ceil((hi - lo) / 8));
    // Number("1e-5") is the literal double; Math.pow can be one ulp off
    for (let e = lo; e <= hi; e += stride) out.push(Number(`1e${e}`));
    return out;
  };
  f.domain = domain;
  f.range = range;
  f.log = true;
  return f;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new Error("no finite values to scale");
  return [lo, hi];
}

/** Format a tick value compactly (decades as 1e-9, linears trimmed). */
export function tickLabel(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    if (Math.abs(v - Math.pow(10, e)) < 1e-9 * v) return `1e${e}`;
  }
  if (v === 0) return "0";
  if (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3) return v.toExponential(0);
  return String(parseFloat(v.toPrecision(6)));
}
