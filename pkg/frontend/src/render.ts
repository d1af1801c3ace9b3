/** Report assembly: one SVG per section plus an index page.
 *
 * Strictly read-only over the archive; rendering twice produces
 * byte-identical output (no timestamps anywhere).
 */
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { loadArchive } from "./archive.js";
import { RENDERERS } from "./sections.js";
import { SECTIONS, type ReportSpec, type RenderedSection, type Section } from "./types.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

const STYLE = `
body { font-family: system-ui, sans-serif; margin: 0; background: #f8fafc; color: #111827; }
header { padding: 16px 24px; background: #111827; color: #f9fafb; }
header h1 { margin: 0; font-size: 18px; }
header .meta { font-family: ui-monospace, monospace; font-size: 12px; opacity: 0.8; margin-top: 6px; }
main { max-width: 980px; margin: 0 auto; padding: 16px 24px 48px; }
section { background: white; border: 1px solid #e5e7eb; border-radius: 10px; padding: 14px 16px; margin-top: 16px; }
section h2 { margin: 0 0 10px; font-size: 15px; }
.notice { color: #92400e; background: #fef3c7; border-radius: 6px; padding: 8px 10px; font-size: 13px; }
table { border-collapse: collapse; margin-top: 10px; font-size: 12px; }
th, td { border-bottom: 1px solid #e5e7eb; padding: 4px 10px; text-align: left; font-family: ui-monospace, monospace; }
img { max-width: 100%; }
`;

export function availableSections(archiveDir: string): Section[] {
  const archive = loadArchive(archiveDir);
  return SECTIONS.filter((s) => RENDERERS[s](archive).note === null);
}

export function render(spec: ReportSpec): number {
  const archive = loadArchive(spec.archiveDir);
  mkdirSync(spec.outputDir, { recursive: true });

  const rendered: RenderedSection[] = spec.sections.map((s) =>
    RENDERERS[s](archive),
  );
  for (const r of rendered) {
    if (r.svgFile && r.svg) {
      writeFileSync(join(spec.outputDir, r.svgFile), r.svg);
    }
  }

  const name = archive.summary["scenario"] ?? "run";
  const metaKeys = ["scenario", "engine", "seed", "version", "overall_pass"];
  const meta = metaKeys
    .filter((k) => archive.summary[k] !== undefined)
    .map((k) => `${k} = ${archive.summary[k]}`)
    .join(" | ");

  const body = rendered
    .map((r) => {
      const parts = [`<section id="${r.section}">`, `<h2>${r.section}</h2>`];
      if (r.note) {
        parts.push(`<div class="notice">section skipped: ${esc(r.note)}</div>`);
      } else {
        if (r.svgFile) parts.push(`<img src="${r.svgFile}" alt="${r.section}"/>`);
        parts.push(r.tableHtml);
      }
      parts.push("</section>");
      return parts.join("\n");
    })
    .join("\n");

  const html = `<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8"/>
<title>run report: ${esc(name)}</title>
<style>${STYLE}</style>
</head>
<body>
<header>
<h1>run report: ${esc(name)}</h1>
<div class="meta">${esc(meta)}</div>
<div class="meta">archive: ${esc(spec.archiveDir)}</div>
</header>
<main>
${body}
</main>
</body>
</html>
`;
  writeFileSync(join(spec.outputDir, "index.html"), html);
  return 0;
}
