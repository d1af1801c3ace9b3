/** Readers for the madflow run-archive file formats.
 *
 * The archive is the only interface to the simulation side: key = value
 * text (summary.txt, manifest.txt) and simple comma-separated tables with
 * no quoting (analyses.csv, density.csv, trajectories.csv).
 */
import { existsSync, readFileSync } from "node:fs";
import { join } from "node:path";
import type {
  AnalysesTables,
  Archive,
  DensityRow,
  Summary,
  TrajectoryRow,
} from "./types.js";

export class ArchiveError extends Error {}

export function parseKeyValues(text: string): Summary {
  const out: Summary = {};
  for (const line of text.split("\n")) {
    const stripped = line.trim();
    if (!stripped || stripped.startsWith("#")) continue;
    const eq = stripped.indexOf("=");
    if (eq < 0) continue;
    out[stripped.slice(0, eq).trim()] = stripped.slice(eq + 1).trim();
  }
  return out;
}

export function parseAnalysesCsv(text: string): AnalysesTables {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines[0] !== "analysis,record,field,value") {
    throw new ArchiveError("analyses.csv header mismatch");
  }
  const tables: Record<string, Record<number, Record<string, string>>> = {};
  for (const line of lines.slice(1)) {
    const first = line.indexOf(",");
    const second = line.indexOf(",", first + 1);
    const third = line.indexOf(",", second + 1);
    const analysis = line.slice(0, first);
    const record = Number(line.slice(first + 1, second));
    const field = line.slice(second + 1, third);
    const value = line.slice(third + 1);
    tables[analysis] ??= {};
    tables[analysis][record] ??= {};
    tables[analysis][record][field] = value;
  }
  const out: AnalysesTables = {};
  for (const [analysis, records] of Object.entries(tables)) {
    out[analysis] = Object.keys(records)
      .map(Number)
      .sort((a, b) => a - b)
      .map((i) => records[i]);
  }
  return out;
}

export function parseDensityCsv(text: string): DensityRow[] {
  const lines = text.split("\n").filter((l) => l.length > 0);
  const header = lines[0].split(",");
  const has2d = header.includes("y");
  return lines.slice(1).map((line) => {
    const parts = line.split(",").map(Number);
    return has2d
      ? { t: parts[0], x: parts[1], y: parts[2], rho: parts[3] }
      : { t: parts[0], x: parts[1], rho: parts[2] };
  });
}

export function parseTrajectoriesCsv(text: string): TrajectoryRow[] {
  const lines = text.split("\n").filter((l) => l.length > 0);
  return lines.slice(1).map((line) => {
    const parts = line.split(",").map(Number);
    return { walker: parts[0], t: parts[1], q: parts.slice(2) };
  });
}

export function loadArchive(dir: string): Archive {
  const manifestPath = join(dir, "manifest.txt");
  const summaryPath = join(dir, "summary.txt");
  if (!existsSync(manifestPath) || !existsSync(summaryPath)) {
    throw new ArchiveError(
      `${dir} is not a run archive (manifest.txt/summary.txt missing)`,
    );
  }
  const manifest = parseKeyValues(readFileSync(manifestPath, "utf8"));
  const summary = parseKeyValues(readFileSync(summaryPath, "utf8"));
  const analysesPath = join(dir, "analyses.csv");
  const analyses = existsSync(analysesPath)
    ? parseAnalysesCsv(readFileSync(analysesPath, "utf8"))
    : {};
  const densityPath = join(dir, "density.csv");
  const trajPath = join(dir, "trajectories.csv");
  return {
    dir,
    manifest,
    summary,
    analyses,
    density: existsSync(densityPath)
      ? parseDensityCsv(readFileSync(densityPath, "utf8"))
      : null,
    trajectories: existsSync(trajPath)
      ? parseTrajectoriesCsv(readFileSync(trajPath, "utf8"))
      : null,
  };
}
