import type { FigureSpec } from "../figure.js";
import { manifestTag } from "../figure.js";
import { numericColumn, readCsv, requireColumns } from "../csv.js";
import { renderChart, type Series } from "../svg.js";

/** Simulated density trajectory with optional truncation overlays. */
export function renderDensity(spec: FigureSpec): string {
  const ts = readCsv(spec.inputs.timeseries);
  requireColumns(ts, ["t", "k1"]);
  const tag = manifestTag(spec.inputs.manifest);

  const series: Series[] = [
    { label: `simulation${tag}`, x: numericColumn(ts, "t"), y: numericColumn(ts, "k1"), kind: "line" },
  ];
  if (spec.inputs.meanfield) {
    const mf = readCsv(spec.inputs.meanfield);
    requireColumns(mf, ["t", "u"]);
    series.push({
      label: "mean field",
      x: numericColumn(mf, "t"),
      y: numericColumn(mf, "u"),
      kind: "dashed",
    });
  }
  if (spec.inputs.pair) {
    const pair = readCsv(spec.inputs.pair);
    requireColumns(pair, ["t", "u", "closure"]);
    const closure = pair.rows.length ? pair.rows[0][pair.header.indexOf("closure")] : "pair";
    series.push({
      label: `pair (${closure})`,
      x: numericColumn(pair, "t"),
      y: numericColumn(pair, "u"),
      kind: "line",
    });
  }
  return renderChart({
    title: "Population density",
    xLabel: "time",
    yLabel: "density k1",
    series,
  });
}
