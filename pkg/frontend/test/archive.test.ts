import { describe, expect, it } from "vitest";
import {
  parseAnalysesCsv,
  parseDensityCsv,
  parseKeyValues,
  parseTrajectoriesCsv,
} from "../src/archive.js";

describe("key-value parser", () => {
  it("reads summary-style text and ignores comments", () => {
    const out = parseKeyValues(
      "# header\nscenario = demo\noverall_pass = true\nempty\n",
    );
    expect(out["scenario"]).toBe("demo");
    expect(out["overall_pass"]).toBe("true");
    expect(Object.keys(out)).toHaveLength(2);
  });

  it("keeps '=' inside values", () => {
    const out = parseKeyValues("files = a=1,b=2\n");
    expect(out["files"]).toBe("a=1,b=2");
  });
});

describe("analyses table parser", () => {
  const text = [
    "analysis,record,field,value",
    "equivariance,0,t,0.0",
    "equivariance,0,l1,0.03",
    "equivariance,1,t,1.0",
    "equivariance,1,l1,0.04",
    "caustic,0,detected,true",
  ].join("\n");

  it("pivots long format into per-analysis records", () => {
    const tables = parseAnalysesCsv(text);
    expect(tables["equivariance"]).toHaveLength(2);
    expect(tables["equivariance"][1]["l1"]).toBe("0.04");
    expect(tables["caustic"][0]["detected"]).toBe("true");
  });

  it("rejects a wrong header", () => {
    expect(() => parseAnalysesCsv("a,b,c\n")).toThrow(/header/);
  });
});

describe("density and trajectory parsers", () => {
  it("reads 1D density rows", () => {
    const rows = parseDensityCsv("t,x,rho\n0.0,-1.0,0.2\n0.0,1.0,0.3\n");
    expect(rows).toHaveLength(2);
    expect(rows[1]).toEqual({ t: 0, x: 1, rho: 0.3 });
  });

  it("reads 2D density rows", () => {
    const rows = parseDensityCsv("t,x,y,rho\n0.5,1.0,2.0,0.1\n");
    expect(rows[0].y).toBe(2);
  });

  it("reads trajectory rows with any dimension", () => {
    const rows = parseTrajectoriesCsv("walker,t,q1,q2\n3,0.5,1.0,-2.0\n");
    expect(rows[0].walker).toBe(3);
    expect(rows[0].q).toEqual([1, -2]);
  });
});
