/** The two figure kinds: CDF overlays (dashed = full system, solid = reduced)
 * and log-log rate plots with a fitted line. */
import { writeFileSync } from "node:fs";

import { readCsv, requireSchema, SchemaMismatch } from "./csv.js";
import {
  HEIGHT,
  linearScale,
  logScale,
  MARGIN,
  Scale,
  SvgBuilder,
  ticks,
  WIDTH,
} from "./svg.js";

export interface CdfOverlaySpec {
  kind: "cdf_overlay";
  /** CSV with columns x,F for the full delay system (drawn dashed) */
  full: string;
  /** CSV with columns x,F for the reduced/averaged process (drawn solid) */
  reduced: string;
  xLabel: string;
  title: string;
  output: string;
}

export interface SlopeSpec {
  kind: "slope";
  /** ensemble summary CSV carrying an 'eps' column and the metric column */
  input: string;
  metric: string;
  title: string;
  output: string;
}

export type FigureSpec = CdfOverlaySpec | SlopeSpec;

const PLOT_RANGE_X: [number, number] = [MARGIN.left, WIDTH - MARGIN.right];
const PLOT_RANGE_Y: [number, number] = [HEIGHT - MARGIN.bottom, MARGIN.top];

/** Spread-free extrema; sample CSVs can carry hundreds of thousands of rows. */
function extent(xs: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of xs) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

/** Right-continuous step polyline of an empirical CDF, deduplicated at pixel
 * resolution (large sample files would otherwise emit megabytes of
 * coincident segments; the dedupe is deterministic, so byte-stability
 * holds). */
function cdfSteps(x: number[], f: number[], xs: Scale, ys: Scale): Array<[number, number]> {
  const pts: Array<[number, number]> = [];
  let lastX = Infinity;
  let lastY = Infinity;
  const push = (px: number, py: number, force = false) => {
    if (force || Math.abs(px - lastX) >= 0.25 || Math.abs(py - lastY) >= 0.25) {
      pts.push([px, py]);
      lastX = px;
      lastY = py;
    }
  };
  push(xs(xs.domain[0]), ys(0), true);
  for (let i = 0; i < x.length; i++) {
    const prev = i === 0 ? 0 : f[i - 1];
    push(xs(x[i]), ys(prev));
    push(xs(x[i]), ys(f[i]));
  }
  push(xs(xs.domain[1]), ys(f[f.length - 1]), true);
  return pts;
}

function renderCdfOverlay(spec: CdfOverlaySpec): string {
  const a = readCsv(spec.full);
  const b = readCsv(spec.reduced);
  requireSchema(a, ["x", "F"], spec.full);
  requireSchema(b, ["x", "F"], spec.reduced);
  const [loA, hiA] = extent(a.columns[0]);
  const [loB, hiB] = extent(b.columns[0]);
  const lo = Math.min(loA, loB);
  const hi = Math.max(hiA, hiB);
  const pad = 0.04 * (hi - lo || 1);
  const xs = linearScale([lo - pad, hi + pad], PLOT_RANGE_X);
  const ys = linearScale([0, 1], PLOT_RANGE_Y);

  const svg = new SvgBuilder();
  svg.axes(xs, ys, spec.xLabel, "F", ticks(lo, hi), ticks(0, 1, 5));
  svg.polyline(cdfSteps(b.columns[0], b.columns[1], xs, ys), "#1a1a1a", false);
  svg.polyline(cdfSteps(a.columns[0], a.columns[1], xs, ys), "#c03030", true);
  svg.legend([
    { label: "full delay system (dashed)", dashed: true, color: "#c03030" },
    { label: "reduced / averaged (solid)", dashed: false, color: "#1a1a1a" },
  ]);
  svg.text((PLOT_RANGE_X[0] + PLOT_RANGE_X[1]) / 2, 18, spec.title);
  return svg.finish();
}

function leastSquares(x: number[], y: number[]): { slope: number; intercept: number } {
  const n = x.length;
  const mx = x.reduce((s, v) => s + v, 0) / n;
  const my = y.reduce((s, v) => s + v, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) ** 2;
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

function renderSlope(spec: SlopeSpec): string {
  const t = readCsv(spec.input);
  const iEps = t.header.indexOf("eps");
  const iMet = t.header.indexOf(spec.metric);
  if (iEps < 0 || iMet < 0) {
    throw new SchemaMismatch(
      `${spec.input}: need columns 'eps' and '${spec.metric}', found [${t.header.join(",")}]`,
    );
  }
  const eps = t.columns[iEps];
  const val = t.columns[iMet];
  if (eps.some((v) => v <= 0) || val.some((v) => v <= 0)) {
    throw new SchemaMismatch(`${spec.input}: rate plots need positive eps and values`);
  }
  const [epsLo, epsHi] = extent(eps);
  const xs = logScale([epsLo / 1.3, epsHi * 1.3], PLOT_RANGE_X);
  const [yLo, yHi] = extent(val);
  const ys = logScale([yLo / 2, yHi * 2], PLOT_RANGE_Y);

  const fit = leastSquares(eps.map(Math.log10), val.map(Math.log10));
  const svg = new SvgBuilder();
  const xt = [...new Set(eps)].sort((p, q) => p - q);
  const yt = [yLo, Math.sqrt(yLo * yHi), yHi];
  svg.axes(xs, ys, "eps (log)", `${spec.metric} (log)`, xt, yt);
  const fitPts: Array<[number, number]> = xt.map((e) => [
    xs(e),
    ys(Math.pow(10, fit.intercept + fit.slope * Math.log10(e))),
  ]);
  svg.polyline(fitPts, "#1a1a1a", false, 1.2);
  for (let i = 0; i < eps.length; i++) {
    svg.circle(xs(eps[i]), ys(val[i]), 4, "#c03030");
  }
  svg.text(
    (PLOT_RANGE_X[0] + PLOT_RANGE_X[1]) / 2,
    18,
    `${spec.title} (fitted slope ${fit.slope.toFixed(3)})`,
  );
  return svg.finish();
}

export function render(spec: FigureSpec): string {
  const svg = spec.kind === "cdf_overlay" ? renderCdfOverlay(spec) : renderSlope(spec);
  writeFileSync(spec.output, svg);
  return spec.output;
}
