/** Deterministic synthetic image/mask samples for demos and tests. */

import { Tensor, rng } from "./tensor";

export interface SyntheticSample {
  image: Tensor; // [size, size, 3] in [0, 1]
  mask: Tensor; // [size, size] 0/1
  label: number;
}

/** A bright blob on noisy background; mask marks the blob disk. */
export function syntheticSample(seed: number, size: number, label = seed % 3): SyntheticSample {
  const random = rng(seed * 7919 + 17);
  const cy = Math.floor(size * (0.3 + 0.4 * random()));
  const cx = Math.floor(size * (0.3 + 0.4 * random()));
  const radius = Math.max(2, Math.floor(size * 0.15));
  const image = Tensor.zeros([size, size, 3]);
  const mask = Tensor.zeros([size, size]);
  for (let i = 0; i < size; i++) {
    for (let j = 0; j < size; j++) {
      const d2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
      const blob = Math.exp(-d2 / (2 * radius * radius));
      for (let c = 0; c < 3; c++) {
        image.set3(i, j, c, Math.min(1, 0.1 * random() + blob));
      }
      if (d2 <= radius * radius) mask.data[i * size + j] = 1;
    }
  }
  return { image, mask, label };
}
