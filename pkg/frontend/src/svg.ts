/** Minimal SVG assembly: everything the figures need, nothing more. */

export const GROUP_COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

export const RUN_COLORS = ["#000000", "#d62728", "#1f77b4", "#2ca02c",
  "#9467bd", "#ff7f0e"];

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export class Scale {
  constructor(
    readonly x0: number, readonly x1: number,
    readonly y0: number, readonly y1: number,
    readonly px0: number, readonly px1: number,
    readonly py0: number, readonly py1: number,
  ) {}

  x(v: number): number {
    return this.px0 + ((v - this.x0) / (this.x1 - this.x0)) * (this.px1 - this.px0);
  }

  /** SVG y grows downward; data y grows upward. */
  y(v: number): number {
    return this.py1 - ((v - this.y0) / (this.y1 - this.y0)) * (this.py1 - this.py0);
  }
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(`<rect x="${x}" y="${y}" width="${w}" height="${h}" style="${style}"/>`);
  }

  circle(cx: number, cy: number, r: number, style: string, cls = ""): void {
    const c = cls ? ` class="${cls}"` : "";
    this.parts.push(`<circle${c} cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" style="${style}"/>`);
  }

  polyline(points: [number, number][], style: string, cls = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const c = cls ? ` class="${cls}"` : "";
    this.parts.push(`<polyline${c} points="${pts}" style="fill:none;${style}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" style="${style}"/>`);
  }

  text(x: number, y: number, content: string, style: string, extra = ""): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" style="${style}" ${extra}>${esc(content)}</text>`);
  }

  marker(x: number, y: number, kind: "start" | "end" | "uav", color = "#000"): void {
    if (kind === "start") {
      this.parts.push(`<rect class="marker-start" x="${fmt(x - 4)}" y="${fmt(y - 4)}" width="8" height="8" style="fill:${color}"/>`);
    } else if (kind === "end") {
      this.parts.push(`<path class="marker-end" d="M ${fmt(x)} ${fmt(y - 5)} L ${fmt(x + 5)} ${fmt(y + 4)} L ${fmt(x - 5)} ${fmt(y + 4)} Z" style="fill:${color}"/>`);
    } else {
      this.parts.push(`<circle class="marker-uav" cx="${fmt(x)}" cy="${fmt(y)}" r="4.5" style="fill:none;stroke:${color};stroke-width:2"/>`);
    }
  }

  openGroup(cls: string, transform = ""): void {
    const t = transform ? ` transform="${transform}"` : "";
    this.parts.push(`<g class="${cls}"${t}>`);
  }

  closeGroup(): void {
    this.parts.push("</g>");
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" style="fill:white"/>`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

export function drawAxes(doc: SvgDoc, scale: Scale, xLabel: string,
                         yLabel: string, ticks = 5): void {
  const style = "stroke:#333;stroke-width:1";
  doc.line(scale.px0, scale.py1, scale.px1, scale.py1, style);
  doc.line(scale.px0, scale.py0, scale.px0, scale.py1, style);
  for (let i = 0; i <= ticks; i++) {
    const xv = scale.x0 + (i / ticks) * (scale.x1 - scale.x0);
    const yv = scale.y0 + (i / ticks) * (scale.y1 - scale.y0);
    const px = scale.x(xv);
    const py = scale.y(yv);
    doc.line(px, scale.py1, px, scale.py1 + 4, style);
    doc.text(px, scale.py1 + 16, trimNum(xv), "font-size:10px;text-anchor:middle");
    doc.line(scale.px0 - 4, py, scale.px0, py, style);
    doc.text(scale.px0 - 6, py + 3, trimNum(yv), "font-size:10px;text-anchor:end");
  }
  doc.text((scale.px0 + scale.px1) / 2, scale.py1 + 32, xLabel,
           "font-size:12px;text-anchor:middle", 'class="axis-x"');
  doc.text(14, (scale.py0 + scale.py1) / 2, yLabel,
           "font-size:12px;text-anchor:middle",
           `class="axis-y" transform="rotate(-90 14 ${(scale.py0 + scale.py1) / 2})"`);
}

function trimNum(v: number): string {
  const a = Math.abs(v);
  if (a >= 1000) return v.toFixed(0);
  if (a >= 10) return v.toFixed(1).replace(/\.0$/, "");
  return v.toFixed(2).replace(/0+$/, "").replace(/\.$/, "");
}
