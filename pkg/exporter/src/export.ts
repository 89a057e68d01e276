/**
 * Exports one sample in the downstream pipeline's input contract:
 * heatmap_<method>.npy (float32 2D, already in [0, 1]), pred.json with
 * the model name, predicted class and confidence, and gt_mask.png
 * (8-bit grayscale, foreground 255).
 */

import * as fs from "fs";
import * as path from "path";

import { CLASS_NAMES, DualHeadNet } from "./model";
import { writeNpyFloat32 } from "./npy";
import { writePngGray8 } from "./png";
import { SaliencyMethod, saliency } from "./saliency";
import { Tensor } from "./tensor";

export const METHODS: SaliencyMethod[] = ["GradCAM", "GradCAMpp", "ScoreCAM"];

export interface ExportedFiles {
  heatmaps: Record<SaliencyMethod, string>;
  predJson: string;
  gtMaskPng: string;
  predictedClass: string;
  confidence: number;
}

export function exportSample(
  net: DualHeadNet,
  image: Tensor, // [H, W, 3]
  gtMask: Tensor, // [H, W] or [H, W, 1], values 0/1
  outDir: string,
  modelName = "dualhead-tiny"
): ExportedFiles {
  fs.mkdirSync(outDir, { recursive: true });
  const [h, w] = image.shape;

  const { probs } = net.classify(image);
  let best = 0;
  for (let k = 1; k < probs.data.length; k++) if (probs.data[k] > probs.data[best]) best = k;
  const predictedClass = CLASS_NAMES[best];
  const confidence = probs.data[best];

  const heatmaps = {} as Record<SaliencyMethod, string>;
  for (const method of METHODS) {
    const cam = saliency(net, image, method, best);
    const file = path.join(outDir, `heatmap_${method}.npy`);
    writeNpyFloat32(file, h, w, cam.data);
    heatmaps[method] = file;
  }

  const predJson = path.join(outDir, "pred.json");
  fs.writeFileSync(
    predJson,
    JSON.stringify(
      { model_name: modelName, predicted_class: predictedClass, confidence },
      null,
      2
    ) + "\n"
  );

  const gtMaskPng = path.join(outDir, "gt_mask.png");
  const pixels = new Uint8Array(h * w);
  for (let i = 0; i < h * w; i++) pixels[i] = gtMask.data[i] > 0.5 ? 255 : 0;
  writePngGray8(gtMaskPng, h, w, pixels);

  return { heatmaps, predJson, gtMaskPng, predictedClass, confidence };
}
