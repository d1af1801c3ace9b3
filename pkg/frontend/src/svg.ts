/** Minimal deterministic SVG builders: line charts and heatmaps.
 *
 * No timestamps, no randomness: rendering the same data twice produces
 * byte-identical files.
 */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color?: string;
  dashed?: boolean;
}

const W = 640;
const H = 360;
const MARGIN = { left: 58, right: 16, top: 28, bottom: 42 };
const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed",
                 "#0891b2", "#be185d", "#4d7c0f"];

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  return Number(v.toPrecision(6)).toString();
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + s * 1e-9; v += s) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

export function linePlot(
  series: Series[],
  opts: { title: string; xlabel: string; ylabel: string },
): string {
  const xs = series.flatMap((s) => s.xs).filter(Number.isFinite);
  const ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) [x0, x1] = [x0 - 1, x1 + 1];
  if (y1 === y0) [y0, y1] = [y0 - 1, y1 + 1];
  const pad = 0.06 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const px = (x: number) =>
    MARGIN.left + ((x - x0) / (x1 - x0)) * (W - MARGIN.left - MARGIN.right);
  const py = (y: number) =>
    H - MARGIN.bottom - ((y - y0) / (y1 - y0)) * (H - MARGIN.top - MARGIN.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<text x="${W / 2}" y="18" text-anchor="middle" font-size="14">${opts.title}</text>`,
  );
  for (const t of niceTicks(x0, x1)) {
    const x = px(t);
    parts.push(
      `<line x1="${fmt(x)}" y1="${H - MARGIN.bottom}" x2="${fmt(x)}" y2="${MARGIN.top}" stroke="#e5e7eb"/>`,
      `<text x="${fmt(x)}" y="${H - MARGIN.bottom + 16}" text-anchor="middle" font-size="11">${fmt(t)}</text>`,
    );
  }
  for (const t of niceTicks(y0, y1)) {
    const y = py(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${W - MARGIN.right}" y2="${fmt(y)}" stroke="#e5e7eb"/>`,
      `<text x="${MARGIN.left - 6}" y="${fmt(y + 4)}" text-anchor="end" font-size="11">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" height="${H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#9ca3af"/>`,
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="12">${opts.xlabel}</text>`,
    `<text x="14" y="${H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 ${H / 2})">${opts.ylabel}</text>`,
  );
  series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const pts = s.xs
      .map((x, k) => [x, s.ys[k]])
      .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y))
      .map(([x, y]) => `${fmt(px(x))},${fmt(py(y))}`)
      .join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.6"${dash}/>`,
    );
    const ly = MARGIN.top + 14 + 16 * i;
    parts.push(
      `<line x1="${W - 170}" y1="${ly - 4}" x2="${W - 146}" y2="${ly - 4}" stroke="${color}" stroke-width="2"${dash}/>`,
      `<text x="${W - 140}" y="${ly}" font-size="11">${s.label}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n");
}

/** Blue-to-yellow colormap over [0, 1]. */
function colormap(v: number): string {
  const t = Math.max(0, Math.min(1, v));
  const r = Math.round(20 + 235 * t);
  const g = Math.round(30 + 190 * t);
  const b = Math.round(120 * (1 - t) + 40);
  return `rgb(${r},${g},${b})`;
}

export function heatmap(
  xs: number[],
  ys: number[],
  values: number[][],
  opts: { title: string; xlabel: string; ylabel: string },
): string {
  const vmax = Math.max(...values.flat());
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const cw = plotW / xs.length;
  const ch = plotH / ys.length;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<text x="${W / 2}" y="18" text-anchor="middle" font-size="14">${opts.title}</text>`,
  );
  for (let i = 0; i < xs.length; i++) {
    for (let j = 0; j < ys.length; j++) {
      const v = values[i][j] / (vmax || 1);
      const x = MARGIN.left + i * cw;
      const y = H - MARGIN.bottom - (j + 1) * ch;
      parts.push(
        `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(cw + 0.5)}" height="${fmt(ch + 0.5)}" fill="${colormap(v)}"/>`,
      );
    }
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#9ca3af"/>`,
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="12">${opts.xlabel}</text>`,
    `<text x="14" y="${H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 ${H / 2})">${opts.ylabel}</text>`,
    `<text x="${MARGIN.left}" y="${H - MARGIN.bottom + 16}" font-size="11">${fmt(xs[0])}</text>`,
    `<text x="${W - MARGIN.right}" y="${H - MARGIN.bottom + 16}" text-anchor="end" font-size="11">${fmt(xs[xs.length - 1])}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n");
}
