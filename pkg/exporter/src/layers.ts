/**
 * Forward and backward passes for the handful of layers the dual-head
 * network needs.  Everything is naive loops over [H, W, C] tensors;
 * the networks this package builds are tiny, clarity wins.
 */

import { Tensor } from "./tensor";

// ---------------------------------------------------------------------------
// conv2d, stride s, TensorFlow-style "same" padding (output = ceil(in / s))

export interface Conv2dCache {
  input: Tensor;
  kernel: Tensor;
  stride: number;
  padTop: number;
  padLeft: number;
  outShape: number[];
}

function samePadding(inSize: number, k: number, s: number): { out: number; pad: number } {
  const out = Math.ceil(inSize / s);
  const total = Math.max((out - 1) * s + k - inSize, 0);
  return { out, pad: Math.floor(total / 2) };
}

export function conv2d(
  input: Tensor,
  kernel: Tensor, // [kh, kw, cin, cout]
  bias: Tensor, // [cout]
  stride: number
): { output: Tensor; cache: Conv2dCache } {
  const [h, w, cin] = input.shape;
  const [kh, kw, kcin, cout] = kernel.shape;
  if (kcin !== cin) throw new Error(`conv2d: kernel cin ${kcin} != input cin ${cin}`);
  const { out: oh, pad: padTop } = samePadding(h, kh, stride);
  const { out: ow, pad: padLeft } = samePadding(w, kw, stride);
  const output = Tensor.zeros([oh, ow, cout]);
  for (let oi = 0; oi < oh; oi++) {
    for (let oj = 0; oj < ow; oj++) {
      for (let co = 0; co < cout; co++) {
        let acc = bias.data[co];
        for (let ki = 0; ki < kh; ki++) {
          const ii = oi * stride + ki - padTop;
          if (ii < 0 || ii >= h) continue;
          for (let kj = 0; kj < kw; kj++) {
            const jj = oj * stride + kj - padLeft;
            if (jj < 0 || jj >= w) continue;
            for (let ci = 0; ci < cin; ci++) {
              acc += input.at3(ii, jj, ci) * kernel.data[((ki * kw + kj) * cin + ci) * cout + co];
            }
          }
        }
        output.set3(oi, oj, co, acc);
      }
    }
  }
  return { output, cache: { input, kernel, stride, padTop, padLeft, outShape: output.shape } };
}

export function conv2dBackward(
  dOut: Tensor,
  cache: Conv2dCache
): { dInput: Tensor; dKernel: Tensor; dBias: Tensor } {
  const { input, kernel, stride, padTop, padLeft } = cache;
  const [h, w, cin] = input.shape;
  const [kh, kw, , cout] = kernel.shape;
  const [oh, ow] = dOut.shape;
  const dInput = Tensor.zeros(input.shape);
  const dKernel = Tensor.zeros(kernel.shape);
  const dBias = Tensor.zeros([cout]);
  for (let oi = 0; oi < oh; oi++) {
    for (let oj = 0; oj < ow; oj++) {
      for (let co = 0; co < cout; co++) {
        const g = dOut.at3(oi, oj, co);
        if (g === 0) continue;
        dBias.data[co] += g;
        for (let ki = 0; ki < kh; ki++) {
          const ii = oi * stride + ki - padTop;
          if (ii < 0 || ii >= h) continue;
          for (let kj = 0; kj < kw; kj++) {
            const jj = oj * stride + kj - padLeft;
            if (jj < 0 || jj >= w) continue;
            for (let ci = 0; ci < cin; ci++) {
              const kidx = ((ki * kw + kj) * cin + ci) * cout + co;
              dKernel.data[kidx] += input.at3(ii, jj, ci) * g;
              dInput.data[(ii * w + jj) * cin + ci] += kernel.data[kidx] * g;
            }
          }
        }
      }
    }
  }
  return { dInput, dKernel, dBias };
}

// ---------------------------------------------------------------------------
// transposed convolution, stride s: output is exactly [h*s, w*s, cout];
// scatter contributions falling outside are clipped.

export interface ConvT2dCache {
  input: Tensor;
  kernel: Tensor;
  stride: number;
}

export function convTranspose2d(
  input: Tensor,
  kernel: Tensor, // [kh, kw, cin, cout]
  bias: Tensor,
  stride: number
): { output: Tensor; cache: ConvT2dCache } {
  const [h, w, cin] = input.shape;
  const [kh, kw, kcin, cout] = kernel.shape;
  if (kcin !== cin) throw new Error(`convT: kernel cin ${kcin} != input cin ${cin}`);
  const oh = h * stride;
  const ow = w * stride;
  const output = Tensor.zeros([oh, ow, cout]);
  for (let i = 0; i < oh * ow; i++) {
    for (let co = 0; co < cout; co++) output.data[i * cout + co] = bias.data[co];
  }
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      for (let ki = 0; ki < kh; ki++) {
        const oi = i * stride + ki;
        if (oi >= oh) continue;
        for (let kj = 0; kj < kw; kj++) {
          const oj = j * stride + kj;
          if (oj >= ow) continue;
          for (let ci = 0; ci < cin; ci++) {
            const x = input.at3(i, j, ci);
            if (x === 0) continue;
            for (let co = 0; co < cout; co++) {
              output.data[(oi * ow + oj) * cout + co] +=
                x * kernel.data[((ki * kw + kj) * cin + ci) * cout + co];
            }
          }
        }
      }
    }
  }
  return { output, cache: { input, kernel, stride } };
}

export function convTranspose2dBackward(
  dOut: Tensor,
  cache: ConvT2dCache
): { dInput: Tensor; dKernel: Tensor; dBias: Tensor } {
  const { input, kernel, stride } = cache;
  const [h, w, cin] = input.shape;
  const [kh, kw, , cout] = kernel.shape;
  const [oh, ow] = dOut.shape;
  const dInput = Tensor.zeros(input.shape);
  const dKernel = Tensor.zeros(kernel.shape);
  const dBias = Tensor.zeros([cout]);
  for (let i = 0; i < oh * ow; i++) {
    for (let co = 0; co < cout; co++) dBias.data[co] += dOut.data[i * cout + co];
  }
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      for (let ki = 0; ki < kh; ki++) {
        const oi = i * stride + ki;
        if (oi >= oh) continue;
        for (let kj = 0; kj < kw; kj++) {
          const oj = j * stride + kj;
          if (oj >= ow) continue;
          for (let ci = 0; ci < cin; ci++) {
            const x = input.at3(i, j, ci);
            for (let co = 0; co < cout; co++) {
              const kidx = ((ki * kw + kj) * cin + ci) * cout + co;
              const g = dOut.data[(oi * ow + oj) * cout + co];
              dKernel.data[kidx] += x * g;
              dInput.data[(i * w + j) * cin + ci] += kernel.data[kidx] * g;
            }
          }
        }
      }
    }
  }
  return { dInput, dKernel, dBias };
}

// ---------------------------------------------------------------------------
// elementwise

export function relu(x: Tensor): Tensor {
  const out = x.clone();
  for (let i = 0; i < out.data.length; i++) if (out.data[i] < 0) out.data[i] = 0;
  return out;
}

export function reluBackward(dOut: Tensor, x: Tensor): Tensor {
  const dIn = dOut.clone();
  for (let i = 0; i < dIn.data.length; i++) if (x.data[i] <= 0) dIn.data[i] = 0;
  return dIn;
}

export function sigmoid(x: Tensor): Tensor {
  const out = new Tensor(x.shape);
  for (let i = 0; i < x.data.length; i++) out.data[i] = 1 / (1 + Math.exp(-x.data[i]));
  return out;
}

export function sigmoidBackward(dOut: Tensor, s: Tensor): Tensor {
  const dIn = new Tensor(s.shape);
  for (let i = 0; i < s.data.length; i++) dIn.data[i] = dOut.data[i] * s.data[i] * (1 - s.data[i]);
  return dIn;
}

// ---------------------------------------------------------------------------
// pooling / dense / softmax

export function globalAvgPool(x: Tensor): Tensor {
  const [h, w, c] = x.shape;
  const out = Tensor.zeros([c]);
  for (let i = 0; i < h * w; i++) {
    for (let k = 0; k < c; k++) out.data[k] += x.data[i * c + k];
  }
  for (let k = 0; k < c; k++) out.data[k] /= h * w;
  return out;
}

export function globalAvgPoolBackward(dOut: Tensor, inShape: number[]): Tensor {
  const [h, w, c] = inShape;
  const dIn = Tensor.zeros(inShape);
  for (let i = 0; i < h * w; i++) {
    for (let k = 0; k < c; k++) dIn.data[i * c + k] = dOut.data[k] / (h * w);
  }
  return dIn;
}

export function dense(x: Tensor, weight: Tensor, bias: Tensor): Tensor {
  const [inDim, outDim] = weight.shape;
  if (x.size !== inDim) throw new Error(`dense: input ${x.size} != ${inDim}`);
  const out = Tensor.zeros([outDim]);
  for (let o = 0; o < outDim; o++) {
    let acc = bias.data[o];
    for (let i = 0; i < inDim; i++) acc += x.data[i] * weight.data[i * outDim + o];
    out.data[o] = acc;
  }
  return out;
}

export function denseBackward(
  dOut: Tensor,
  x: Tensor,
  weight: Tensor
): { dInput: Tensor; dWeight: Tensor; dBias: Tensor } {
  const [inDim, outDim] = weight.shape;
  const dInput = Tensor.zeros([inDim]);
  const dWeight = Tensor.zeros(weight.shape);
  const dBias = dOut.clone();
  for (let i = 0; i < inDim; i++) {
    for (let o = 0; o < outDim; o++) {
      dWeight.data[i * outDim + o] = x.data[i] * dOut.data[o];
      dInput.data[i] += weight.data[i * outDim + o] * dOut.data[o];
    }
  }
  return { dInput, dWeight, dBias };
}

export function softmax(logits: Tensor): Tensor {
  const out = new Tensor(logits.shape);
  let max = -Infinity;
  for (const v of logits.data) max = Math.max(max, v);
  let sum = 0;
  for (let i = 0; i < logits.data.length; i++) {
    out.data[i] = Math.exp(logits.data[i] - max);
    sum += out.data[i];
  }
  for (let i = 0; i < out.data.length; i++) out.data[i] /= sum;
  return out;
}

// ---------------------------------------------------------------------------
// bilinear resize on single-channel maps (half-pixel centers)

export function bilinearResize(x: Tensor, outH: number, outW: number): Tensor {
  const [h, w] = x.shape;
  const out = Tensor.zeros([outH, outW, 1]);
  for (let oi = 0; oi < outH; oi++) {
    const sy = Math.min(Math.max(((oi + 0.5) * h) / outH - 0.5, 0), h - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, h - 1);
    const fy = sy - y0;
    for (let oj = 0; oj < outW; oj++) {
      const sx = Math.min(Math.max(((oj + 0.5) * w) / outW - 0.5, 0), w - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, w - 1);
      const fx = sx - x0;
      const v =
        x.at3(y0, x0, 0) * (1 - fy) * (1 - fx) +
        x.at3(y0, x1, 0) * (1 - fy) * fx +
        x.at3(y1, x0, 0) * fy * (1 - fx) +
        x.at3(y1, x1, 0) * fy * fx;
      out.set3(oi, oj, 0, v);
    }
  }
  return out;
}

export function bilinearResizeBackward(dOut: Tensor, inH: number, inW: number): Tensor {
  const [outH, outW] = dOut.shape;
  const dIn = Tensor.zeros([inH, inW, 1]);
  for (let oi = 0; oi < outH; oi++) {
    const sy = Math.min(Math.max(((oi + 0.5) * inH) / outH - 0.5, 0), inH - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, inH - 1);
    const fy = sy - y0;
    for (let oj = 0; oj < outW; oj++) {
      const sx = Math.min(Math.max(((oj + 0.5) * inW) / outW - 0.5, 0), inW - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, inW - 1);
      const fx = sx - x0;
      const g = dOut.at3(oi, oj, 0);
      dIn.data[(y0 * inW + x0)] += g * (1 - fy) * (1 - fx);
      dIn.data[(y0 * inW + x1)] += g * (1 - fy) * fx;
      dIn.data[(y1 * inW + x0)] += g * fy * (1 - fx);
      dIn.data[(y1 * inW + x1)] += g * fy * fx;
    }
  }
  return dIn;
}
