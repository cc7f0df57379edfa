/** Deterministic SVG assembly: fixed precision, no ids, no timestamps. */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { left: 64, right: 16, top: 28, bottom: 48 };

export function fmt(v: number): string {
  // fixed 2-decimal pixel coordinates keep output byte-stable
  return v.toFixed(2);
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  const f = ((v: number) => inner(Math.log10(v))) as Scale;
  f.domain = domain;
  return f;
}

/** Round tick positions covering [lo, hi]. */
export function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = (span / n) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return String(parseFloat(v.toPrecision(6)));
  }
  return v.toExponential(1);
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(width = WIDTH, height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, dashed: boolean, widthPx = 1.6): void {
    const d = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const dash = dashed ? ' stroke-dasharray="7 4"' : "";
    this.parts.push(
      `<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${widthPx}"${dash}/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#000", widthPx = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${widthPx}"/>`,
    );
  }

  text(x: number, y: number, s: string, anchor = "middle", size = 12): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-size="${size}">${escapeXml(s)}</text>`,
    );
  }

  axes(xs: Scale, ys: Scale, xlabel: string, ylabel: string, xticks: number[], yticks: number[]): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.line(x0, y0, x1, y0);
    this.line(x0, y0, x0, y1);
    for (const t of xticks) {
      const px = xs(t);
      this.line(px, y0, px, y0 + 5);
      this.text(px, y0 + 20, tickLabel(t));
    }
    for (const t of yticks) {
      const py = ys(t);
      this.line(x0 - 5, py, x0, py);
      this.text(x0 - 8, py + 4, tickLabel(t), "end");
    }
    this.text((x0 + x1) / 2, HEIGHT - 10, xlabel);
    this.parts.push(
      `<text x="16" y="${fmt((y0 + y1) / 2)}" text-anchor="middle" font-size="12" ` +
        `transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})">${escapeXml(ylabel)}</text>`,
    );
  }

  legend(entries: Array<{ label: string; dashed: boolean; color: string }>): void {
    let y = MARGIN.top + 8;
    const x = MARGIN.left + 14;
    for (const e of entries) {
      const dash = e.dashed ? ' stroke-dasharray="7 4"' : "";
      this.parts.push(
        `<line x1="${x}" y1="${y}" x2="${x + 34}" y2="${y}" stroke="${e.color}" stroke-width="1.6"${dash}/>`,
      );
      this.text(x + 42, y + 4, e.label, "start");
      y += 18;
    }
  }

  finish(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
