import type { FigureSpec } from "../figure.js";
import { numericColumn, readCsv, requireColumns } from "../csv.js";
import { renderChart } from "../svg.js";

/** Time series of the uniform-bound diagnostic alongside the density. */
export function renderRuelle(spec: FigureSpec): string {
  const ts = readCsv(spec.inputs.timeseries);
  requireColumns(ts, ["t", "k1", "kappa_hat"]);
  const t = numericColumn(ts, "t");
  return renderChart({
    title: "Uniform correlation bound over time",
    xLabel: "time",
    yLabel: "intensity",
    series: [
      { label: "kappa_hat", x: t, y: numericColumn(ts, "kappa_hat"), kind: "line" },
      { label: "density k1", x: t, y: numericColumn(ts, "k1"), kind: "dashed" },
    ],
  });
}
