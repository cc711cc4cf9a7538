import type { FigureSpec } from "../figure.js";
import { column, distinct, numericColumn, readCsv, requireColumns } from "../csv.js";
import { renderChart, PALETTE, type Band, type Series } from "../svg.js";

/** Forward-equation residual with 95% bands, one band per test function. */
export function renderResidual(spec: FigureSpec): string {
  const table = readCsv(spec.inputs.residual);
  requireColumns(table, ["theta", "t", "residual", "se"]);
  const thetaCol = column(table, "theta");
  const t = numericColumn(table, "t");
  const residual = numericColumn(table, "residual");
  const se = numericColumn(table, "se");

  const bands: Band[] = [];
  const series: Series[] = [];
  distinct(thetaCol).forEach((theta, idx) => {
    const x: number[] = [];
    const y: number[] = [];
    const lo: number[] = [];
    const hi: number[] = [];
    thetaCol.forEach((rowTheta, i) => {
      if (rowTheta === theta) {
        x.push(t[i]);
        y.push(residual[i]);
        lo.push(residual[i] - 1.96 * se[i]);
        hi.push(residual[i] + 1.96 * se[i]);
      }
    });
    const color = PALETTE[idx % PALETTE.length];
    bands.push({ label: `theta ${theta} 95% band`, x, lo, hi, color });
    series.push({ label: `theta ${theta} residual`, x, y, kind: "points", color });
  });
  if (bands.length === 0) {
    throw new Error(`${spec.inputs.residual}: no residual rows to plot`);
  }
  return renderChart({
    title: "Forward-equation residual",
    xLabel: "time",
    yLabel: "d/dt E[F] - E[LF]",
    bands,
    series,
    zeroLine: true,
  });
}
