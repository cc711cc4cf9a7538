import type { FigureSpec } from "../figure.js";
import { column, distinct, numericColumn, readCsv, requireColumns } from "../csv.js";
import { renderChart, type Series } from "../svg.js";

/** Normalised pair correlation k2 / k1^2 against separation, over time. */
export function renderPairCorr(spec: FigureSpec): string {
  const corr = readCsv(spec.inputs.correlations);
  requireColumns(corr, ["t", "r_lo", "r_hi", "k2"]);
  const ts = readCsv(spec.inputs.timeseries);
  requireColumns(ts, ["t", "k1"]);

  const k1ByTime = new Map<string, number>();
  const tsT = column(ts, "t");
  const tsK1 = numericColumn(ts, "k1");
  tsT.forEach((t, i) => k1ByTime.set(t, tsK1[i]));

  const corrT = column(corr, "t");
  const rLo = numericColumn(corr, "r_lo");
  const rHi = numericColumn(corr, "r_hi");
  const k2 = numericColumn(corr, "k2");

  const times = distinct(corrT);
  // at most six curves: first, last and evenly spaced times between
  const keep =
    times.length <= 6
      ? times
      : [...new Set([0, 1, 2, 3, 4, 5].map((i) => times[Math.round((i * (times.length - 1)) / 5)]))].map(
          (i) => i,
        );

  const series: Series[] = [];
  for (const t of keep) {
    const k1 = k1ByTime.get(t);
    if (k1 === undefined || !(k1 > 0)) {
      continue;
    }
    const x: number[] = [];
    const y: number[] = [];
    corrT.forEach((rowT, i) => {
      if (rowT === t) {
        x.push(0.5 * (rLo[i] + rHi[i]));
        y.push(k2[i] / (k1 * k1));
      }
    });
    series.push({ label: `t = ${t}`, x, y, kind: "line" });
  }
  if (series.length === 0) {
    throw new Error("paircorr: no time with positive density in the inputs");
  }
  const rMax = Math.max(...rHi);
  series.push({ label: "Poisson level", x: [0, rMax], y: [1, 1], kind: "dashed", color: "#888888" });
  return renderChart({
    title: "Pair correlation over time",
    xLabel: "separation",
    yLabel: "k2 / k1^2",
    series,
  });
}
