/**
 * Convergence test for training: stop once the current validation loss
 * lands within one standard deviation of where the recent loss
 * trajectory predicted it, i.e. |L_val - L_pred| <= sigma(L).
 */

export interface EarlyStopState {
  lossHistory: number[]; // oldest first; last entry is the current epoch
  patienceWindow: number; // trajectory length used for the prediction (5 in training)
}

export interface EarlyStopDecision {
  stop: boolean;
  lPred: number;
  sigma: number;
  residual: number;
}

/** Least-squares line through (0, y0) .. (n-1, y_{n-1}), evaluated at x. */
function linearFitAt(ys: number[], x: number): number {
  const n = ys.length;
  if (n === 1) return ys[0];
  const xMean = (n - 1) / 2;
  let yMean = 0;
  for (const y of ys) yMean += y;
  yMean /= n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i++) {
    num += (i - xMean) * (ys[i] - yMean);
    den += (i - xMean) * (i - xMean);
  }
  const slope = num / den;
  return yMean + slope * (x - xMean);
}

function sampleStd(ys: number[]): number {
  const n = ys.length;
  if (n < 2) return 0;
  let mean = 0;
  for (const y of ys) mean += y;
  mean /= n;
  let ss = 0;
  for (const y of ys) ss += (y - mean) * (y - mean);
  return Math.sqrt(ss / (n - 1));
}

/**
 * The window is the patienceWindow losses immediately preceding the
 * current one; L_pred extrapolates their least-squares line one step
 * forward (to the current epoch) and sigma is the window's sample
 * standard deviation.  Requires patienceWindow + 1 history entries.
 */
export function earlyStopCheck(state: EarlyStopState): EarlyStopDecision {
  const { lossHistory, patienceWindow } = state;
  if (patienceWindow < 2) throw new Error("patienceWindow must be >= 2");
  if (lossHistory.length < patienceWindow + 1) {
    throw new Error(
      `insufficient history: need ${patienceWindow + 1} losses, got ${lossHistory.length}`
    );
  }
  const lVal = lossHistory[lossHistory.length - 1];
  const window = lossHistory.slice(-patienceWindow - 1, -1);
  const lPred = linearFitAt(window, patienceWindow);
  const sigma = sampleStd(window);
  const residual = Math.abs(lVal - lPred);
  return { stop: residual <= sigma, lPred, sigma, residual };
}
