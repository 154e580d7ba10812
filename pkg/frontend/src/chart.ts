/**
 * Minimal SVG line chart for the performance-index trend. Pure string
 * building so it tests without a DOM; values plot exactly as given.
 */

import type { TrendPoint } from "./model.js";

export interface ChartOptions {
  width: number;
  height: number;
  padding: number;
}

const DEFAULTS: ChartOptions = { width: 560, height: 220, padding: 28 };

function scaleX(ordinal: number, min: number, max: number, options: ChartOptions): number {
  const span = Math.max(max - min, 1);
  const inner = options.width - 2 * options.padding;
  return options.padding + ((ordinal - min) / span) * inner;
}

function scaleY(pi: number, options: ChartOptions): number {
  const inner = options.height - 2 * options.padding;
  return options.padding + (1 - pi) * inner; // pi is always in [0, 1]
}

export function trendChartSvg(points: TrendPoint[], options: ChartOptions = DEFAULTS): string {
  const { width, height, padding } = options;
  const parts: string[] = [
    `<svg viewBox="0 0 ${width} ${height}" class="trend-chart" role="img" aria-label="performance index trend">`,
    `<line x1="${padding}" y1="${height - padding}" x2="${width - padding}" y2="${height - padding}" class="axis"/>`,
    `<line x1="${padding}" y1="${padding}" x2="${padding}" y2="${height - padding}" class="axis"/>`,
    `<text x="4" y="${padding}" class="tick">1</text>`,
    `<text x="4" y="${height - padding}" class="tick">0</text>`,
  ];
  if (points.length > 0) {
    const ordinals = points.map((p) => p.ordinal);
    const min = Math.min(...ordinals);
    const max = Math.max(...ordinals);
    const coords = points.map(
      (p) => [scaleX(p.ordinal, min, max, options), scaleY(p.pi, options)] as const,
    );
    if (coords.length > 1) {
      const path = coords.map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`).join(" ");
      parts.push(`<polyline points="${path}" class="trend-line" fill="none"/>`);
    }
    points.forEach((point, i) => {
      const coord = coords[i];
      if (!coord) return;
      const [x, y] = coord;
      parts.push(
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="3.5" class="trend-dot" data-ordinal="${point.ordinal}" data-pi="${point.pi}"><title>session ${point.ordinal}: ${point.pi}</title></circle>`,
      );
    });
  } else {
    parts.push(
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="empty">no scored sessions yet</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
