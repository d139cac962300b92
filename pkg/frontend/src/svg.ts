/**
 * Minimal SVG document builder.  Figures are assembled from primitives
 * so rendering stays a pure function of the input data: no timestamps,
 * no randomness, byte-stable output.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

const XML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
};

export function escapeXml(text: string): string {
  return text.replace(/[&<>"]/g, (ch) => XML_ESCAPES[ch] ?? ch);
}

function fmt(value: number): string {
  return Number(value.toFixed(2)).toString();
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {}

  rect(x: number, y: number, w: number, h: number, fill: string,
       extra = ""): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
      `fill="${fill}"${extra ? " " + extra : ""}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#333",
       width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"/>`);
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, opts: {
    size?: number; anchor?: "start" | "middle" | "end";
    fill?: string; rotate?: number; bold?: boolean;
  } = {}): void {
    const size = opts.size ?? 11;
    const anchor = opts.anchor ?? "start";
    const fill = opts.fill ?? "#222";
    const transform = opts.rotate
      ? ` transform="rotate(${opts.rotate} ${fmt(x)} ${fmt(y)})"` : "";
    const weight = opts.bold ? ' font-weight="bold"' : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
      `text-anchor="${anchor}" fill="${fill}"${weight}${transform} ` +
      `font-family="sans-serif">${escapeXml(content)}</text>`);
  }

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

/** Diagonal-hatch pattern marking configurations that could not run. */
export const HATCH_DEF =
  '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" ' +
  'patternTransform="rotate(45)"><rect width="6" height="6" fill="#f4f4f4"/>' +
  '<line x1="0" y1="0" x2="0" y2="6" stroke="#b33" stroke-width="1.5"/></pattern></defs>';

/** Round a value up to a friendly axis limit (1/2/5 ladder). */
export function niceCeiling(value: number): number {
  if (value <= 0) return 1;
  const magnitude = Math.pow(10, Math.floor(Math.log10(value)));
  for (const step of [1, 2, 5, 10]) {
    if (value <= step * magnitude) return step * magnitude;
  }
  return 10 * magnitude;
}

export interface LinearScale {
  (value: number): number;
  ticks: number[];
}

export function linearScale(maxValue: number, pixelSpan: number,
                            pixelStart: number): LinearScale {
  const top = niceCeiling(maxValue);
  const scale = ((value: number) =>
    pixelStart - (value / top) * pixelSpan) as LinearScale;
  scale.ticks = [0, 0.25, 0.5, 0.75, 1].map((f) => f * top);
  return scale;
}

export function logScale(maxValue: number, minValue: number, pixelSpan: number,
                         pixelStart: number): LinearScale {
  const floor = Math.pow(10, Math.floor(Math.log10(Math.max(minValue, 1e-12))));
  const ceiling = Math.pow(10, Math.ceil(Math.log10(maxValue)));
  const span = Math.log10(ceiling) - Math.log10(floor) || 1;
  const scale = ((value: number) =>
    pixelStart - ((Math.log10(Math.max(value, floor)) - Math.log10(floor)) / span)
      * pixelSpan) as LinearScale;
  const ticks: number[] = [];
  for (let t = floor; t <= ceiling * 1.0001; t *= 10) ticks.push(t);
  scale.ticks = ticks;
  return scale;
}
