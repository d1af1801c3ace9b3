/** Shared shapes for the archive readers and section renderers. */

export interface Summary {
  [key: string]: string;
}

/** Long-format analyses.csv pivoted back into per-analysis record lists. */
export type AnalysisRecord = Record<string, string>;
export type AnalysesTables = Record<string, AnalysisRecord[]>;

export interface DensityRow {
  t: number;
  x: number;
  y?: number;
  rho: number;
}

export interface TrajectoryRow {
  walker: number;
  t: number;
  q: number[];
}

export interface Archive {
  dir: string;
  manifest: Summary;
  summary: Summary;
  analyses: AnalysesTables;
  density: DensityRow[] | null;
  trajectories: TrajectoryRow[] | null;
}

export const SECTIONS = [
  "fields",
  "trajectories",
  "equivariance",
  "wallstrom",
  "measurement",
  "residuals",
] as const;

export type Section = (typeof SECTIONS)[number];

export interface ReportSpec {
  archiveDir: string;
  outputDir: string;
  sections: Section[];
}

export interface RenderedSection {
  section: Section;
  svgFile: string | null;
  svg: string | null;
  tableHtml: string;
  /** set when the section was skipped, with the visible reason */
  note: string | null;
}
