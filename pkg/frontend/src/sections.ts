/** Section renderers: each turns archive tables into one SVG plus an HTML
 * table. Numbers are copied from the archive, never recomputed. */
import type { Archive, RenderedSection, Section } from "./types.js";
import { heatmap, linePlot, type Series } from "./svg.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function htmlTable(headers: string[], rows: string[][]): string {
  const head = headers.map((h) => `<th>${esc(h)}</th>`).join("");
  const body = rows
    .map((r) => `<tr>${r.map((c) => `<td>${esc(c)}</td>`).join("")}</tr>`)
    .join("\n");
  return `<table>\n<thead><tr>${head}</tr></thead>\n<tbody>\n${body}\n</tbody>\n</table>`;
}

function summaryRows(archive: Archive, prefix: string): string[][] {
  return Object.entries(archive.summary)
    .filter(([k]) => k.startsWith(prefix + "."))
    .map(([k, v]) => [k.slice(prefix.length + 1), v]);
}

function skipped(section: Section, why: string): RenderedSection {
  return { section, svgFile: null, svg: null, tableHtml: "", note: why };
}

function renderFields(archive: Archive): RenderedSection {
  if (!archive.density || archive.density.length === 0) {
    return skipped("fields", "no density data in the archive");
  }
  const times = [...new Set(archive.density.map((r) => r.t))];
  const is2d = archive.density[0].y !== undefined;
  let svg: string;
  if (!is2d) {
    const series: Series[] = times.map((t) => {
      const rows = archive.density!.filter((r) => r.t === t);
      return { label: `t = ${t}`, xs: rows.map((r) => r.x), ys: rows.map((r) => r.rho) };
    });
    svg = linePlot(series, { title: "density snapshots", xlabel: "q", ylabel: "rho" });
  } else {
    const tLast = times[times.length - 1];
    const rows = archive.density.filter((r) => r.t === tLast);
    const xs = [...new Set(rows.map((r) => r.x))].sort((a, b) => a - b);
    const ys = [...new Set(rows.map((r) => r.y!))].sort((a, b) => a - b);
    const grid = xs.map((x) =>
      ys.map((y) => rows.find((r) => r.x === x && r.y === y)?.rho ?? 0),
    );
    svg = heatmap(xs, ys, grid, {
      title: `density at t = ${tLast}`,
      xlabel: "q1",
      ylabel: "q2",
    });
  }
  const table = htmlTable(
    ["snapshot time", "points"],
    times.map((t) => [String(t), String(archive.density!.filter((r) => r.t === t).length)]),
  );
  return { section: "fields", svgFile: "fields.svg", svg, tableHtml: table, note: null };
}

function renderTrajectories(archive: Archive): RenderedSection {
  if (!archive.trajectories || archive.trajectories.length === 0) {
    return skipped("trajectories", "no trajectory data in the archive");
  }
  const walkers = [...new Set(archive.trajectories.map((r) => r.walker))];
  const shown = walkers.slice(0, 60);
  const series: Series[] = shown.map((w) => {
    const rows = archive.trajectories!.filter((r) => r.walker === w);
    return {
      label: "",
      xs: rows.map((r) => r.t),
      ys: rows.map((r) => r.q[0]),
      color: "#2563eb55" as string,
    };
  });
  const svg = linePlot(series, {
    title: `trajectory fan (${shown.length} of ${walkers.length} walkers)`,
    xlabel: "t",
    ylabel: "q1",
  });
  const table = htmlTable(
    ["walkers archived", "walkers drawn", "checkpoints"],
    [[String(walkers.length), String(shown.length),
      String(new Set(archive.trajectories.map((r) => r.t)).size)]],
  );
  return { section: "trajectories", svgFile: "trajectories.svg", svg, tableHtml: table, note: null };
}

function renderEquivariance(archive: Archive): RenderedSection {
  const rows = archive.analyses["equivariance"];
  if (!rows) return skipped("equivariance", "equivariance analysis not in the archive");
  const ts = rows.map((r) => Number(r.t));
  const l1 = rows.map((r) => Number(r.l1));
  const thr = rows.map((r) => Number(r.threshold));
  const svg = linePlot(
    [
      { label: "L1 distance", xs: ts, ys: l1 },
      { label: "contract", xs: ts, ys: thr, dashed: true, color: "#dc2626" },
    ],
    { title: "walker histogram vs |psi|^2", xlabel: "t", ylabel: "L1" },
  );
  const table = htmlTable(["t", "L1", "threshold"],
                          rows.map((r) => [r.t, r.l1, r.threshold]));
  return { section: "equivariance", svgFile: "equivariance.svg", svg, tableHtml: table, note: null };
}

function renderWallstrom(archive: Archive): RenderedSection {
  const rows = archive.analyses["wallstrom"];
  if (!rows) return skipped("wallstrom", "wallstrom analysis not in the archive");
  const radii = rows.map((r) => Number(r.radius));
  const winding = rows.map((r) => Number(r.winding));
  const svg = linePlot(
    [{ label: "winding", xs: radii, ys: winding }],
    { title: "circulation / 2 pi hbar vs radius", xlabel: "radius", ylabel: "winding" },
  );
  const table = htmlTable(
    ["node", "radius", "winding", "circulation"],
    rows.map((r) => [`(${r.node_x}, ${r.node_y})`, r.radius, r.winding, r.circulation]),
  );
  const extra = htmlTable(["summary key", "value"], summaryRows(archive, "wallstrom"));
  return { section: "wallstrom", svgFile: "wallstrom.svg", svg,
           tableHtml: table + "\n" + extra, note: null };
}

function renderMeasurement(archive: Archive): RenderedSection {
  const rows = archive.analyses["measurement"];
  if (!rows) return skipped("measurement", "measurement analysis not in the archive");
  const ts = rows.map((r) => Number(r.t));
  const svg = linePlot(
    [
      { label: "branch 1", xs: ts, ys: rows.map((r) => Number(r.w1)) },
      { label: "branch 2", xs: ts, ys: rows.map((r) => Number(r.w2)) },
      { label: "sep / 10", xs: ts, ys: rows.map((r) => Number(r.separation) / 10),
        dashed: true },
    ],
    { title: "branch weights and pointer separation", xlabel: "t", ylabel: "weight" },
  );
  const table = htmlTable(
    ["t", "w1", "w2", "separation", "width"],
    rows.map((r) => [r.t, r.w1, r.w2, r.separation, r.width]),
  );
  const extra = htmlTable(["summary key", "value"], summaryRows(archive, "measurement"));
  return { section: "measurement", svgFile: "measurement.svg", svg,
           tableHtml: table + "\n" + extra, note: null };
}

const RESIDUAL_ANALYSES = ["hj-residuals", "mean-acceleration", "energy-balance",
                           "fokker-planck", "equivalence", "caustic"];

function renderResiduals(archive: Archive): RenderedSection {
  const rows: string[][] = [];
  for (const analysis of RESIDUAL_ANALYSES) {
    const recs = archive.analyses[analysis];
    if (!recs) continue;
    for (const r of recs.slice(0, 12)) {
      for (const [field, value] of Object.entries(r)) {
        rows.push([analysis, field, value]);
      }
    }
    const verdict = archive.summary[`pass.${analysis}`];
    if (verdict !== undefined) rows.push([analysis, "pass", verdict]);
  }
  if (rows.length === 0) {
    return skipped("residuals", "no residual-type analyses in the archive");
  }
  const series: Series[] = [];
  const hj = archive.analyses["hj-residuals"];
  if (hj) {
    series.push({
      label: "residual",
      xs: hj.map((_, i) => i),
      ys: hj.map((r) => Number(r.residual)),
    });
    series.push({
      label: "threshold",
      xs: hj.map((_, i) => i),
      ys: hj.map((r) => Number(r.threshold)),
      dashed: true,
      color: "#dc2626",
    });
  }
  const svg = series.length
    ? linePlot(series, { title: "flow-equation residuals", xlabel: "mode index", ylabel: "max-norm" })
    : null;
  return {
    section: "residuals",
    svgFile: svg ? "residuals.svg" : null,
    svg,
    tableHtml: htmlTable(["analysis", "field", "value"], rows),
    note: null,
  };
}

export const RENDERERS: Record<Section, (a: Archive) => RenderedSection> = {
  fields: renderFields,
  trajectories: renderTrajectories,
  equivariance: renderEquivariance,
  wallstrom: renderWallstrom,
  measurement: renderMeasurement,
  residuals: renderResiduals,
};
