/** Root mean squared error between two (T, 3) matrices. */
export function rmse(pred: number[][], truth: number[][]): number {
  if (pred.length !== truth.length) {
    throw new Error(`rmse shapes disagree: ${pred.length} vs ${truth.length} rows`);
  }
  let sum = 0;
  let n = 0;
  for (let t = 0; t < pred.length; t++) {
    if (pred[t].length !== truth[t].length) {
      throw new Error(`rmse row ${t} width mismatch`);
    }
    for (let s = 0; s < pred[t].length; s++) {
      const d = pred[t][s] - truth[t][s];
      sum += d * d;
      n += 1;
    }
  }
  if (n === 0) throw new Error("rmse of empty matrices");
  return Math.sqrt(sum / n);
}
