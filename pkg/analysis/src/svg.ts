/** Minimal deterministic SVG chart renderer.
 *
 * Fixed canvas, fonts and palette; every coordinate is formatted through the
 * same fixed-precision function, so rendering the same data always produces
 * the same bytes (no ids, no timestamps).
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  kind: "line" | "points" | "dashed";
  color?: string;
}

export interface Band {
  label: string;
  x: number[];
  lo: number[];
  hi: number[];
  color?: string;
}

export interface BarGroup {
  label: string;
  x: number[];
  height: number[];
  width: number;
  color?: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series?: Series[];
  bands?: Band[];
  bars?: BarGroup[];
  zeroLine?: boolean;
  width?: number;
  height?: number;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const MARGIN = { top: 44, right: 24, bottom: 52, left: 68 };

function fmt(value: number): string {
  if (!Number.isFinite(value)) {
    return "0";
  }
  return Number(value.toFixed(3)).toString();
}

function fmtTick(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) return value.toExponential(1);
  return Number(value.toPrecision(4)).toString();
}

/** Tick positions via the usual 1-2-5 ladder. */
export function ticks(lo: number, hi: number, target = 6): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const raw = (hi - lo) / target;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * Math.abs(step); v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderChart(spec: ChartSpec): string {
  const width = spec.width ?? 760;
  const height = spec.height ?? 480;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const series = spec.series ?? [];
  const bands = spec.bands ?? [];
  const bars = spec.bars ?? [];

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    xs.push(...s.x);
    ys.push(...s.y);
  }
  for (const b of bands) {
    xs.push(...b.x);
    ys.push(...b.lo, ...b.hi);
  }
  for (const g of bars) {
    for (const x of g.x) {
      xs.push(x - g.width / 2, x + g.width / 2);
    }
    ys.push(0, ...g.height);
  }
  if (spec.zeroLine) {
    ys.push(0);
  }
  const finite = (v: number) => Number.isFinite(v);
  const xod = xs.filter(finite);
  const yod = ys.filter(finite);
  if (xod.length === 0 || yod.length === 0) {
    throw new Error(`figure '${spec.title}': no finite data to plot`);
  }
  let [x0, x1] = [Math.min(...xod), Math.max(...xod)];
  let [y0, y1] = [Math.min(...yod), Math.max(...yod)];
  if (x1 === x0) {
    x1 = x0 + 1;
  }
  const pad = (y1 - y0 || Math.abs(y0) || 1) * 0.06;
  y0 -= pad;
  y1 += pad;

  const px = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * plotW;
  const py = (y: number) => MARGIN.top + plotH - ((y - y0) / (y1 - y0)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `xmlns="http://www.w3.org/2000/svg" font-family="sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${width / 2}" y="24" text-anchor="middle" font-size="15" fill="#222">` +
      `${esc(spec.title)}</text>`,
  );

  // axes, grid, tick labels
  for (const t of ticks(x0, x1)) {
    const gx = fmt(px(t));
    parts.push(
      `<line x1="${gx}" y1="${MARGIN.top}" x2="${gx}" y2="${MARGIN.top + plotH}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
      `<text x="${gx}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" ` +
        `font-size="11" fill="#444">${fmtTick(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const gy = fmt(py(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${gy}" x2="${MARGIN.left + plotW}" y2="${gy}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
      `<text x="${MARGIN.left - 8}" y="${gy}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="11" fill="#444">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#555555"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 12}" text-anchor="middle" ` +
      `font-size="12" fill="#222">${esc(spec.xLabel)}</text>`,
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="12" ` +
      `fill="#222" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${esc(spec.yLabel)}</text>`,
  );

  if (spec.zeroLine && y0 < 0 && y1 > 0) {
    const gy = fmt(py(0));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${gy}" x2="${MARGIN.left + plotW}" y2="${gy}" ` +
        `stroke="#888888" stroke-width="1" stroke-dasharray="2,3"/>`,
    );
  }

  let colorIdx = 0;
  const nextColor = (given?: string) => given ?? PALETTE[colorIdx++ % PALETTE.length];
  const legend: { label: string; color: string }[] = [];

  for (const band of bands) {
    const color = nextColor(band.color);
    const forward = band.x.map((x, i) => `${fmt(px(x))},${fmt(py(band.hi[i]))}`);
    const back = [...band.x.keys()].reverse().map((i) => `${fmt(px(band.x[i]))},${fmt(py(band.lo[i]))}`);
    parts.push(
      `<polygon points="${forward.concat(back).join(" ")}" fill="${color}" fill-opacity="0.18" stroke="none"/>`,
    );
    legend.push({ label: band.label, color });
  }
  for (const group of bars) {
    const color = nextColor(group.color);
    for (let i = 0; i < group.x.length; i += 1) {
      const x = px(group.x[i] - group.width / 2);
      const y = py(Math.max(group.height[i], 0));
      const h = Math.abs(py(0) - py(group.height[i]));
      const w = px(group.x[i] + group.width / 2) - px(group.x[i] - group.width / 2);
      parts.push(
        `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
          `fill="${color}" fill-opacity="0.55" stroke="${color}"/>`,
      );
    }
    legend.push({ label: group.label, color });
  }
  for (const s of series) {
    const color = nextColor(s.color);
    const pts = s.x.map((x, i) => [px(x), py(s.y[i])] as const).filter((p) => p.every(Number.isFinite));
    if (s.kind === "points") {
      for (const [cx, cy] of pts) {
        parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="3" fill="${color}"/>`);
      }
    } else {
      const dash = s.kind === "dashed" ? ` stroke-dasharray="6,4"` : "";
      parts.push(
        `<polyline points="${pts.map(([cx, cy]) => `${fmt(cx)},${fmt(cy)}`).join(" ")}" ` +
          `fill="none" stroke="${color}" stroke-width="1.8"${dash}/>`,
      );
    }
    legend.push({ label: s.label, color });
  }

  legend.forEach((entry, i) => {
    const ly = MARGIN.top + 10 + 17 * i;
    const lx = MARGIN.left + plotW - 160;
    parts.push(
      `<rect x="${lx}" y="${ly - 8}" width="12" height="12" fill="${entry.color}"/>`,
      `<text x="${lx + 18}" y="${ly + 2}" font-size="11" fill="#222">${esc(entry.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
