#!/usr/bin/env node
/** madflow-report render --archive DIR --out DIR [--sections a,b,c] */
import { pathToFileURL } from "node:url";
import { ArchiveError } from "./archive.js";
import { availableSections, render } from "./render.js";
import { SECTIONS, type Section } from "./types.js";

function usage(): never {
  console.error(
    "usage: madflow-report render --archive DIR --out DIR [--sections " +
      SECTIONS.join(",") + "]",
  );
  process.exit(1);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") usage();
  let archiveDir = "";
  let outputDir = "";
  let sections: Section[] | null = null;
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--archive") archiveDir = argv[++i];
    else if (arg === "--out") outputDir = argv[++i];
    else if (arg === "--sections") {
      sections = argv[++i].split(",").map((s) => {
        const t = s.trim() as Section;
        if (!SECTIONS.includes(t)) {
          console.error(`unknown section '${s}'; known: ${SECTIONS.join(", ")}`);
          process.exit(1);
        }
        return t;
      });
    } else usage();
  }
  if (!archiveDir || !outputDir) usage();
  try {
    const chosen = sections ?? availableSections(archiveDir);
    render({ archiveDir, outputDir, sections: chosen });
    console.log(`report written to ${outputDir} (${chosen.length} sections)`);
    return 0;
  } catch (err) {
    if (err instanceof ArchiveError) {
      console.error(`corrupt archive: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (import.meta.url === pathToFileURL(process.argv[1] ?? "").href) {
  process.exit(main(process.argv.slice(2)));
}
