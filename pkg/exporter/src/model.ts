/**
 * Dual-head network: a shared convolutional encoder feeding an
 * independent classification head (global average pooling + dense +
 * softmax over 3 tumor classes) and a segmentation head (transposed-
 * convolution decoder ending in a single-channel sigmoid map bilinearly
 * resized to the input resolution).
 */

import {
  Conv2dCache,
  ConvT2dCache,
  bilinearResize,
  conv2d,
  convTranspose2d,
  dense,
  globalAvgPool,
  relu,
  sigmoid,
  softmax,
} from "./layers";
import { Tensor, fillRandn, rng } from "./tensor";

export type Head = "encoder" | "clf" | "seg";

export interface Param {
  name: string;
  head: Head;
  tensor: Tensor;
}

export interface DualHeadSpec {
  inputSize: number; // square input, inputSize x inputSize x 3
  numClasses: number; // 3 tumor classes
  encoderChannels: number[]; // conv channels of the shared encoder (stride 2 each)
  decoderFilters: number[]; // transposed-conv filter counts of the seg head
  lambda: number; // segmentation-loss weight in the composite loss
}

/** The full-size configuration (225x225x3, decoder 256/128/64/32). */
export const DEFAULT_SPEC: DualHeadSpec = {
  inputSize: 225,
  numClasses: 3,
  encoderChannels: [16, 32],
  decoderFilters: [256, 128, 64, 32],
  lambda: 1.0,
};

export interface ForwardCaches {
  encConvs: Conv2dCache[];
  encPre: Tensor[]; // pre-relu activations
  acts: Tensor; // target layer: last encoder activation (post relu)
  pooled: Tensor;
  logits: Tensor;
  decConvs: ConvT2dCache[];
  decPre: Tensor[];
  outConv: Conv2dCache;
  maskLogits: Tensor;
  maskSigmoid: Tensor;
}

export interface ForwardResult {
  acts: Tensor; // [h', w', c] saliency target layer
  logits: Tensor; // [numClasses]
  probs: Tensor; // [numClasses]
  mask: Tensor; // [inputSize, inputSize, 1] in (0, 1)
  caches: ForwardCaches;
}

export class DualHeadNet {
  readonly spec: DualHeadSpec;
  encKernels: Tensor[] = [];
  encBiases: Tensor[] = [];
  clfWeight: Tensor;
  clfBias: Tensor;
  decKernels: Tensor[] = [];
  decBiases: Tensor[] = [];
  outKernel: Tensor; // 1x1 conv to a single channel
  outBias: Tensor;

  constructor(spec: DualHeadSpec, seed = 1) {
    this.spec = spec;
    const random = rng(seed);
    let cin = 3;
    for (const cout of spec.encoderChannels) {
      const k = Tensor.zeros([3, 3, cin, cout]);
      fillRandn(k, random, Math.sqrt(2 / (9 * cin)));
      this.encKernels.push(k);
      this.encBiases.push(Tensor.zeros([cout]));
      cin = cout;
    }
    const encOut = spec.encoderChannels[spec.encoderChannels.length - 1];
    this.clfWeight = Tensor.zeros([encOut, spec.numClasses]);
    fillRandn(this.clfWeight, random, Math.sqrt(2 / encOut));
    this.clfBias = Tensor.zeros([spec.numClasses]);

    let dcin = encOut;
    for (const f of spec.decoderFilters) {
      const k = Tensor.zeros([3, 3, dcin, f]);
      fillRandn(k, random, Math.sqrt(2 / (9 * dcin)));
      this.decKernels.push(k);
      this.decBiases.push(Tensor.zeros([f]));
      dcin = f;
    }
    this.outKernel = Tensor.zeros([1, 1, dcin, 1]);
    fillRandn(this.outKernel, random, Math.sqrt(2 / dcin));
    this.outBias = Tensor.zeros([1]);
  }

  params(): Param[] {
    const out: Param[] = [];
    this.encKernels.forEach((t, i) => out.push({ name: `enc${i}.kernel`, head: "encoder", tensor: t }));
    this.encBiases.forEach((t, i) => out.push({ name: `enc${i}.bias`, head: "encoder", tensor: t }));
    out.push({ name: "clf.weight", head: "clf", tensor: this.clfWeight });
    out.push({ name: "clf.bias", head: "clf", tensor: this.clfBias });
    this.decKernels.forEach((t, i) => out.push({ name: `dec${i}.kernel`, head: "seg", tensor: t }));
    this.decBiases.forEach((t, i) => out.push({ name: `dec${i}.bias`, head: "seg", tensor: t }));
    out.push({ name: "out.kernel", head: "seg", tensor: this.outKernel });
    out.push({ name: "out.bias", head: "seg", tensor: this.outBias });
    return out;
  }

  /** Shared encoder up to the saliency target layer. */
  encode(image: Tensor): { acts: Tensor; encConvs: Conv2dCache[]; encPre: Tensor[] } {
    let x = image;
    const encConvs: Conv2dCache[] = [];
    const encPre: Tensor[] = [];
    for (let i = 0; i < this.encKernels.length; i++) {
      const { output, cache } = conv2d(x, this.encKernels[i], this.encBiases[i], 2);
      encConvs.push(cache);
      encPre.push(output);
      x = relu(output);
    }
    return { acts: x, encConvs, encPre };
  }

  /** Classification path only (used by saliency methods). */
  classify(image: Tensor): { probs: Tensor; logits: Tensor; acts: Tensor } {
    const { acts } = this.encode(image);
    const pooled = globalAvgPool(acts);
    const logits = dense(pooled, this.clfWeight, this.clfBias);
    return { probs: softmax(logits), logits, acts };
  }

  forward(image: Tensor): ForwardResult {
    const [h, w, c] = image.shape;
    if (c !== 3) throw new Error("expected a 3-channel image");
    const { acts, encConvs, encPre } = this.encode(image);
    const pooled = globalAvgPool(acts);
    const logits = dense(pooled, this.clfWeight, this.clfBias);
    const probs = softmax(logits);

    let z = acts;
    const decConvs: ConvT2dCache[] = [];
    const decPre: Tensor[] = [];
    for (let i = 0; i < this.decKernels.length; i++) {
      const { output, cache } = convTranspose2d(z, this.decKernels[i], this.decBiases[i], 2);
      decConvs.push(cache);
      decPre.push(output);
      z = relu(output);
    }
    const { output: maskLogits, cache: outConv } = conv2d(z, this.outKernel, this.outBias, 1);
    const maskSigmoid = sigmoid(maskLogits);
    const mask = bilinearResize(maskSigmoid, h, w);

    return {
      acts,
      logits,
      probs,
      mask,
      caches: { encConvs, encPre, acts, pooled, logits, decConvs, decPre, outConv, maskLogits, maskSigmoid },
    };
  }
}

/** Small configuration for CPU tests: same topology, tiny widths. */
export function tinyNet(seed = 1, inputSize = 32): DualHeadNet {
  return new DualHeadNet(
    {
      inputSize,
      numClasses: 3,
      encoderChannels: [4, 6],
      decoderFilters: [6, 4],
      lambda: 1.0,
    },
    seed
  );
}

export const CLASS_NAMES = ["Glioma", "Meningioma", "PituitaryTumor"] as const;
