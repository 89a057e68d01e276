/**
 * Minimal dense tensor on Float64Array, row-major.
 *
 * Shapes used across the package:
 *   images          [H, W, C]
 *   conv kernels    [kh, kw, cin, cout]
 *   dense weights   [inDim, outDim]
 */

export class Tensor {
  readonly shape: number[];
  readonly data: Float64Array;

  constructor(shape: number[], data?: Float64Array) {
    this.shape = shape.slice();
    const size = shape.reduce((a, b) => a * b, 1);
    if (data) {
      if (data.length !== size) {
        throw new Error(`data length ${data.length} does not match shape ${shape}`);
      }
      this.data = data;
    } else {
      this.data = new Float64Array(size);
    }
  }

  get size(): number {
    return this.data.length;
  }

  static zeros(shape: number[]): Tensor {
    return new Tensor(shape);
  }

  static fromArray(shape: number[], values: number[]): Tensor {
    return new Tensor(shape, Float64Array.from(values));
  }

  clone(): Tensor {
    return new Tensor(this.shape, this.data.slice());
  }

  /** index helpers for the common ranks */
  at3(i: number, j: number, k: number): number {
    const [, w, c] = this.shape;
    return this.data[(i * w + j) * c + k];
  }

  set3(i: number, j: number, k: number, v: number): void {
    const [, w, c] = this.shape;
    this.data[(i * w + j) * c + k] = v;
  }
}

/** mulberry32: tiny deterministic PRNG, good enough for weight init. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Normal(0, std) via Box-Muller on the seeded PRNG. */
export function randn(random: () => number, std: number): number {
  let u = 0;
  let v = 0;
  while (u === 0) u = random();
  while (v === 0) v = random();
  return std * Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
}

export function fillRandn(t: Tensor, random: () => number, std: number): void {
  for (let i = 0; i < t.data.length; i++) t.data[i] = randn(random, std);
}
