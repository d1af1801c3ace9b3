import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { render, availableSections } from "../src/render.js";
import { main } from "../src/cli.js";
import { SECTIONS } from "../src/types.js";

function fixtureArchive(): string {
  const dir = mkdtempSync(join(tmpdir(), "mfarch-"));
  writeFileSync(join(dir, "manifest.txt"),
    "# madflow run archive\nversion = 0.1.0\nname = demo\n");
  writeFileSync(join(dir, "summary.txt"), [
    "scenario = demo",
    "version = 0.1.0",
    "seed = 0",
    "engine = schrodinger",
    "equivariance.l1_max = 0.032",
    "pass.equivariance = true",
    "overall_pass = true",
    "",
  ].join("\n"));
  writeFileSync(join(dir, "analyses.csv"), [
    "analysis,record,field,value",
    "equivariance,0,t,0.0",
    "equivariance,0,l1,0.031",
    "equivariance,0,threshold,0.05",
    "equivariance,1,t,1.0",
    "equivariance,1,l1,0.035",
    "equivariance,1,threshold,0.05",
    "equivariance,2,t,2.0",
    "equivariance,2,l1,0.04",
    "equivariance,2,threshold,0.05",
    "wallstrom,0,node_x,0.0",
    "wallstrom,0,node_y,0.0",
    "wallstrom,0,radius,0.7",
    "wallstrom,0,winding,0.99993",
    "wallstrom,0,circulation,6.2827",
    "wallstrom,1,node_x,0.0",
    "wallstrom,1,node_y,0.0",
    "wallstrom,1,radius,1.4",
    "wallstrom,1,winding,0.99996",
    "wallstrom,1,circulation,6.2829",
    "measurement,0,t,0.0",
    "measurement,0,w1,0.5",
    "measurement,0,w2,0.5",
    "measurement,0,separation,0.0",
    "measurement,0,width,0.7",
    "measurement,1,t,1.5",
    "measurement,1,w1,0.5",
    "measurement,1,w2,0.5",
    "measurement,1,separation,9.5",
    "measurement,1,width,1.36",
    "hj-residuals,0,mode,quantum-hj",
    "hj-residuals,0,residual,0.0074",
    "hj-residuals,0,threshold,0.01",
    "hj-residuals,1,mode,continuity",
    "hj-residuals,1,residual,0.0024",
    "hj-residuals,1,threshold,0.01",
    "",
  ].join("\n"));
  writeFileSync(join(dir, "density.csv"),
    "t,x,rho\n0.0,-1.0,0.1\n0.0,0.0,0.5\n0.0,1.0,0.1\n" +
    "2.0,-1.0,0.2\n2.0,0.0,0.3\n2.0,1.0,0.2\n");
  writeFileSync(join(dir, "trajectories.csv"),
    "walker,t,q1\n0,0.0,0.1\n0,1.0,0.2\n1,0.0,-0.3\n1,1.0,-0.5\n");
  return dir;
}

describe("report rendering", () => {
  it("detects which sections the archive supports", () => {
    const dir = fixtureArchive();
    const sections = availableSections(dir);
    expect(sections).toEqual([...SECTIONS]);   // fixture covers all six
  });

  it("renders one svg per available section plus an index", () => {
    const dir = fixtureArchive();
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    render({ archiveDir: dir, outputDir: out,
             sections: ["fields", "trajectories", "equivariance"] });
    const files = readdirSync(out).sort();
    expect(files).toEqual(["equivariance.svg", "fields.svg", "index.html",
                           "trajectories.svg"]);
    const index = readFileSync(join(out, "index.html"), "utf8");
    expect(index).toContain("run report: demo");
    expect(index).toContain("0.031");          // numbers copied, not recomputed
    const svg = readFileSync(join(out, "equivariance.svg"), "utf8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("contract");
  });

  it("renders all six section types from one archive", () => {
    const dir = fixtureArchive();
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    render({ archiveDir: dir, outputDir: out, sections: [...SECTIONS] });
    const files = readdirSync(out);
    for (const s of SECTIONS) expect(files).toContain(`${s}.svg`);
    const index = readFileSync(join(out, "index.html"), "utf8");
    expect(index).not.toContain("section skipped");
    expect(index).toContain("0.99996");        // winding copied verbatim
  });

  it("skips missing sections with a visible notice", () => {
    const dir = fixtureArchive();
    const rmIdx = readFileSync(join(dir, "analyses.csv"), "utf8")
      .split("\n").filter((l) => !l.startsWith("wallstrom")).join("\n");
    writeFileSync(join(dir, "analyses.csv"), rmIdx);
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    render({ archiveDir: dir, outputDir: out, sections: [...SECTIONS] });
    const index = readFileSync(join(out, "index.html"), "utf8");
    expect(index).toContain("section skipped");
    expect(readdirSync(out)).not.toContain("wallstrom.svg");
  });

  it("renders an index-only report for an empty section list", () => {
    const dir = fixtureArchive();
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    expect(render({ archiveDir: dir, outputDir: out, sections: [] })).toBe(0);
    expect(readdirSync(out)).toEqual(["index.html"]);
  });

  it("is byte-identical across repeated renders", () => {
    const dir = fixtureArchive();
    const a = mkdtempSync(join(tmpdir(), "mfrep-"));
    const b = mkdtempSync(join(tmpdir(), "mfrep-"));
    const sections = availableSections(dir);
    render({ archiveDir: dir, outputDir: a, sections });
    render({ archiveDir: dir, outputDir: b, sections });
    for (const f of readdirSync(a).sort()) {
      expect(readFileSync(join(b, f), "utf8")).toBe(readFileSync(join(a, f), "utf8"));
    }
  });

  it("cli reports corrupt archives with exit 1", () => {
    const empty = mkdtempSync(join(tmpdir(), "mfempty-"));
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    expect(main(["render", "--archive", empty, "--out", out])).toBe(1);
  });

  it("cli renders via explicit section list", () => {
    const dir = fixtureArchive();
    const out = mkdtempSync(join(tmpdir(), "mfrep-"));
    const code = main(["render", "--archive", dir, "--out", out,
                       "--sections", "equivariance,residuals"]);
    expect(code).toBe(0);
    const index = readFileSync(join(out, "index.html"), "utf8");
    expect(index).toContain("equivariance");
  });
});
