/** Poisson probability of n events at the given mean, computed iteratively
 * (exact enough for overlay comparisons down to ~1e-15 relative). */
export function poissonPmf(n: number, mean: number): number {
  if (mean <= 0) {
    return n === 0 ? 1 : 0;
  }
  let p = Math.exp(-mean);
  for (let k = 1; k <= n; k += 1) {
    p *= mean / k;
  }
  return p;
}
