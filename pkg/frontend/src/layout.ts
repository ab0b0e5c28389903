/**
 * Pure layout math: axis scales, tick placement, and data-to-pixel mapping.
 * Everything here is deterministic and side-effect free so tests can assert
 * geometric facts (e.g. one curve lying below another) on the layout output.
 */

export interface Extent {
  min: number;
  max: number;
}

export type ScaleKind = "linear" | "log";

export interface Scale {
  kind: ScaleKind;
  domain: Extent;
  range: Extent;
  map(v: number): number;
  ticks(): number[];
}

function padExtent(e: Extent, frac = 0.05): Extent {
  const span = e.max - e.min || Math.abs(e.max) || 1;
  return { min: e.min - frac * span, max: e.max + frac * span };
}

export function extentOf(values: number[]): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min > max) return { min: 0, max: 1 };
  if (min === max) return { min: min - 0.5, max: max + 0.5 };
  return { min, max };
}

export function linearScale(domain: Extent, range: Extent, pad = true): Scale {
  const d = pad ? padExtent(domain) : domain;
  const k = (range.max - range.min) / (d.max - d.min);
  return {
    kind: "linear",
    domain: d,
    range,
    map: (v) => range.min + (v - d.min) * k,
    ticks: () => linearTicks(d),
  };
}

export function logScale(domain: Extent, range: Extent): Scale {
  if (domain.min <= 0) throw new Error("log scale needs positive domain");
  const lmin = Math.log10(domain.min);
  const lmax = Math.log10(domain.max);
  const pad = 0.05 * (lmax - lmin || 1);
  const a = lmin - pad;
  const b = lmax + pad;
  const k = (range.max - range.min) / (b - a);
  return {
    kind: "log",
    domain: { min: 10 ** a, max: 10 ** b },
    range,
    map: (v) => range.min + (Math.log10(v) - a) * k,
    ticks: () => logTicks(a, b),
  };
}

export function linearTicks(e: Extent, target = 6): number[] {
  const span = e.max - e.min;
  const raw = span / target;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target) ?? mag * 10;
  const start = Math.ceil(e.min / step) * step;
  const out: number[] = [];
  for (let v = start; v <= e.max + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export function logTicks(la: number, lb: number): number[] {
  const out: number[] = [];
  for (let p = Math.ceil(la); p <= Math.floor(lb); p++) out.push(10 ** p);
  if (out.length < 2) {
    for (let p = Math.floor(la); p <= Math.ceil(lb); p++) {
      for (const m of [1, 2, 5]) {
        const v = m * 10 ** p;
        if (10 ** la <= v && v <= 10 ** lb) out.push(v);
      }
    }
    out.sort((x, y) => x - y);
  }
  return out;
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
  dashed?: boolean;
}

export interface PlacedSeries extends Series {
  points: Array<[number, number]>;
}

export interface PlotLayout {
  width: number;
  height: number;
  plot: { x0: number; y0: number; x1: number; y1: number };
  xScale: Scale;
  yScale: Scale;
  series: PlacedSeries[];
}

export interface LayoutOptions {
  width?: number;
  height?: number;
  xLog?: boolean;
  yLog?: boolean;
}

export function layoutPlot(series: Series[], opts: LayoutOptions = {}): PlotLayout {
  const width = opts.width ?? 720;
  const height = opts.height ?? 480;
  const plot = { x0: 70, y0: 40, x1: width - 20, y1: height - 50 };
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y).filter((v) => Number.isFinite(v));
  const xr = { min: plot.x0, max: plot.x1 };
  const yr = { min: plot.y1, max: plot.y0 }; // SVG y grows downward
  const xScale = opts.xLog ? logScale(extentOf(xs), xr) : linearScale(extentOf(xs), xr);
  const yScale = opts.yLog ? logScale(extentOf(ys), yr) : linearScale(extentOf(ys), yr);
  const placed = series.map((s) => ({
    ...s,
    points: s.x
      .map((xv, i) => [xv, s.y[i]] as [number, number])
      .filter(([, yv]) => Number.isFinite(yv))
      .map(([xv, yv]) => [xScale.map(xv), yScale.map(yv)] as [number, number]),
  }));
  return { width, height, plot, xScale, yScale, series: placed };
}
