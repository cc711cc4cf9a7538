import { dirname, join } from "node:path";

import type { FigureSpec } from "../figure.js";
import { column, distinct, numericColumn, readCsv, requireColumns, writeCsv } from "../csv.js";
import { poissonPmf } from "../poisson.js";
import { renderChart } from "../svg.js";

export interface CountsData {
  time: string;
  window: string;
  n: number[];
  freq: number[];
  se: number[];
  /** Poisson law with the empirical mean: the analytic overlay. */
  poissonFreq: number[];
  mean: number;
}

/** Pick the histogram at one (time, window) and compute its Poisson overlay. */
export function countsOverlay(spec: FigureSpec): CountsData {
  const counts = readCsv(spec.inputs.counts);
  requireColumns(counts, ["t", "window", "n", "freq", "se"]);
  const tCol = column(counts, "t");
  const wCol = column(counts, "window");
  const times = distinct(tCol);
  const windows = distinct(wCol);
  if (times.length === 0) {
    throw new Error(`${spec.inputs.counts}: no histogram rows`);
  }
  const time = spec.options?.t ?? times[times.length - 1];
  const window = spec.options?.window ?? windows[Math.floor(windows.length / 2)];
  if (!times.includes(time)) {
    throw new Error(`counts: no rows at t=${time} (have ${times.join(", ")})`);
  }
  if (!windows.includes(window)) {
    throw new Error(`counts: no rows for window=${window} (have ${windows.join(", ")})`);
  }

  const nAll = numericColumn(counts, "n");
  const freqAll = numericColumn(counts, "freq");
  const seAll = numericColumn(counts, "se");
  const n: number[] = [];
  const freq: number[] = [];
  const se: number[] = [];
  tCol.forEach((rowT, i) => {
    if (rowT === time && wCol[i] === window) {
      n.push(nAll[i]);
      freq.push(freqAll[i]);
      se.push(seAll[i]);
    }
  });
  const mean = n.reduce((acc, v, i) => acc + v * freq[i], 0);
  const nMax = Math.max(...n);
  const full = [...Array(nMax + 1).keys()];
  const freqByN = new Map(n.map((v, i) => [v, freq[i]]));
  const seByN = new Map(n.map((v, i) => [v, se[i]]));
  return {
    time,
    window,
    n: full,
    freq: full.map((v) => freqByN.get(v) ?? 0),
    se: full.map((v) => seByN.get(v) ?? 0),
    poissonFreq: full.map((v) => poissonPmf(v, mean)),
    mean,
  };
}

/** Bars of the empirical window-count law with the Poisson overlay; also
 * emits the overlay table next to the figure for column-level checks. */
export function renderCounts(spec: FigureSpec): string {
  const data = countsOverlay(spec);
  const overlayPath =
    spec.options?.overlayOut ?? join(dirname(spec.outPath), "counts_overlay.csv");
  writeCsv(
    overlayPath,
    ["window", "t", "n", "freq", "se", "poisson_freq"],
    data.n.map((n, i) => [data.window, data.time, n, data.freq[i], data.se[i], data.poissonFreq[i]]),
  );
  return renderChart({
    title: `Window counts at t = ${data.time} (window ${data.window})`,
    xLabel: "count n",
    yLabel: "frequency",
    bars: [{ label: "empirical", x: data.n, height: data.freq, width: 0.8 }],
    series: [
      {
        label: `Poisson(mean ${Number(data.mean.toPrecision(4))})`,
        x: data.n,
        y: data.poissonFreq,
        kind: "points",
        color: "#d62728",
      },
    ],
  });
}
