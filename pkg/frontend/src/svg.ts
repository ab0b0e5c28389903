/** Minimal deterministic SVG assembly (no DOM, fixed float formatting). */

import { PlotLayout } from "./layout.js";

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e5 || a < 1e-4)) return v.toExponential(3);
  return Number(v.toFixed(4)).toString();
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderSvg(
  layout: PlotLayout,
  opts: { title: string; xLabel: string; yLabel: string; annotations?: string[]; warning?: string },
): string {
  const { width, height, plot } = layout;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="monospace" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${esc(opts.title)}</text>`,
  );
  // frame
  parts.push(
    `<rect x="${plot.x0}" y="${plot.y0}" width="${plot.x1 - plot.x0}" ` +
      `height="${plot.y1 - plot.y0}" fill="none" stroke="#333"/>`,
  );
  for (const t of layout.xScale.ticks()) {
    const px = layout.xScale.map(t);
    if (px < plot.x0 - 1 || px > plot.x1 + 1) continue;
    parts.push(`<line x1="${fmt(px)}" y1="${plot.y1}" x2="${fmt(px)}" y2="${plot.y1 + 5}" stroke="#333"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${plot.y1 + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of layout.yScale.ticks()) {
    const py = layout.yScale.map(t);
    if (py > plot.y1 + 1 || py < plot.y0 - 1) continue;
    parts.push(`<line x1="${plot.x0 - 5}" y1="${fmt(py)}" x2="${plot.x0}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(
      `<text x="${plot.x0 - 8}" y="${fmt(py + 4)}" text-anchor="end">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(plot.x0 + plot.x1) / 2}" y="${height - 12}" text-anchor="middle">${esc(opts.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${(plot.y0 + plot.y1) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${(plot.y0 + plot.y1) / 2})">${esc(opts.yLabel)}</text>`,
  );
  layout.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (s.points.length > 0) {
      const pts = s.points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
      const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
      parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dash}/>`);
      if (s.points.length <= 12) {
        for (const [x, y] of s.points) {
          parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="3" fill="${color}"/>`);
        }
      }
    }
    parts.push(
      `<text x="${plot.x1 - 8}" y="${plot.y0 + 16 + 14 * i}" text-anchor="end" fill="${color}">${esc(s.label)}</text>`,
    );
  });
  (opts.annotations ?? []).forEach((a, i) => {
    parts.push(
      `<text x="${plot.x0 + 8}" y="${plot.y0 + 16 + 14 * i}" fill="#333">${esc(a)}</text>`,
    );
  });
  if (opts.warning) {
    parts.push(
      `<rect x="${plot.x0}" y="${plot.y0}" width="${plot.x1 - plot.x0}" height="22" fill="#fff3cd"/>`,
    );
    parts.push(
      `<text x="${(plot.x0 + plot.x1) / 2}" y="${plot.y0 + 15}" text-anchor="middle" fill="#856404">${esc(opts.warning)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
