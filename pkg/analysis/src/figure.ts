import { existsSync, readFileSync, writeFileSync } from "node:fs";

import { renderCounts } from "./figures/counts.js";
import { renderDensity } from "./figures/density.js";
import { renderPairCorr } from "./figures/paircorr.js";
import { renderResidual } from "./figures/residual.js";
import { renderRuelle } from "./figures/ruelle.js";

export type FigureKind = "density" | "paircorr" | "counts" | "ruelle" | "residual";

export interface FigureSpec {
  kind: FigureKind;
  /** Named input CSV paths, e.g. { timeseries: "...", meanfield: "..." }. */
  inputs: Record<string, string>;
  outPath: string;
  options?: Record<string, string>;
}

export function checkInputsExist(spec: FigureSpec): void {
  for (const [name, path] of Object.entries(spec.inputs)) {
    if (!existsSync(path)) {
      throw new Error(`figure ${spec.kind}: input '${name}' not found at ${path}`);
    }
  }
}

/** Run-id tag from a run manifest, used in legends. */
export function manifestTag(path: string | undefined): string {
  if (!path || !existsSync(path)) {
    return "";
  }
  const manifest = JSON.parse(readFileSync(path, "utf8")) as { run_id?: string };
  return manifest.run_id ? ` [${manifest.run_id.slice(0, 8)}]` : "";
}

/** Render one figure to its output path; inputs are never modified. */
export function render(spec: FigureSpec): void {
  checkInputsExist(spec);
  let svg: string;
  switch (spec.kind) {
    case "density":
      svg = renderDensity(spec);
      break;
    case "paircorr":
      svg = renderPairCorr(spec);
      break;
    case "counts":
      svg = renderCounts(spec);
      break;
    case "ruelle":
      svg = renderRuelle(spec);
      break;
    case "residual":
      svg = renderResidual(spec);
      break;
    default:
      throw new Error(`unknown figure kind ${(spec as FigureSpec).kind}`);
  }
  writeFileSync(spec.outPath, svg);
}
