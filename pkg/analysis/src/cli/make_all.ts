import { existsSync, mkdirSync } from "node:fs";
import { join } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { render, type FigureSpec } from "../figure.js";
import { runMain } from "./args.js";

/** Render every figure kind from a run directory's standard file names. */
export function makeAll(runDir: string, outDir: string): string[] {
  mkdirSync(outDir, { recursive: true });
  const path = (name: string) => join(runDir, name);
  const specs: FigureSpec[] = [
    {
      kind: "density",
      inputs: {
        timeseries: path("timeseries.csv"),
        ...(existsSync(path("meanfield.csv")) ? { meanfield: path("meanfield.csv") } : {}),
        ...(existsSync(path("pair.csv")) ? { pair: path("pair.csv") } : {}),
        ...(existsSync(path("manifest.json")) ? { manifest: path("manifest.json") } : {}),
      },
      outPath: join(outDir, "density.svg"),
    },
    {
      kind: "paircorr",
      inputs: { correlations: path("correlations.csv"), timeseries: path("timeseries.csv") },
      outPath: join(outDir, "paircorr.svg"),
    },
    {
      kind: "counts",
      inputs: { counts: path("counts.csv") },
      outPath: join(outDir, "counts.svg"),
    },
    {
      kind: "ruelle",
      inputs: { timeseries: path("timeseries.csv") },
      outPath: join(outDir, "ruelle.svg"),
    },
    {
      kind: "residual",
      inputs: { residual: path("residual.csv") },
      outPath: join(outDir, "residual.svg"),
    },
  ];
  const written: string[] = [];
  for (const spec of specs) {
    render(spec);
    written.push(spec.outPath);
  }
  return written;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  runMain(() => {
    const { values } = parseArgs({
      args: process.argv.slice(2),
      options: { run: { type: "string" }, out: { type: "string" } },
      strict: true,
    });
    if (!values.run || !values.out) {
      throw new Error("usage: make_all --run <run-dir> --out <figure-dir>");
    }
    for (const file of makeAll(values.run, values.out)) {
      console.log(`make-all: wrote ${file}`);
    }
  });
}
