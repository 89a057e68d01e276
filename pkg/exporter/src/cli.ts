/**
 * CLI: `export` writes one synthetic sample through the tiny dual-head
 * network in the downstream pipeline's input contract; `train` runs a
 * short demonstration training loop.
 */

import { exportSample } from "./export";
import { tinyNet } from "./model";
import { syntheticSample } from "./synthetic";
import { Adam, trainStep } from "./train";

function argValue(args: string[], flag: string, fallback: string): string {
  const idx = args.indexOf(flag);
  return idx >= 0 && idx + 1 < args.length ? args[idx + 1] : fallback;
}

export function main(argv: string[]): number {
  const [command, ...args] = argv;
  if (command === "export") {
    const outDir = argValue(args, "--out-dir", "export-out");
    const seed = parseInt(argValue(args, "--seed", "1"), 10);
    const size = parseInt(argValue(args, "--size", "64"), 10);
    const net = tinyNet(seed, size);
    const sample = syntheticSample(seed, size);
    const files = exportSample(net, sample.image, sample.mask, outDir);
    console.log(
      JSON.stringify(
        {
          out_dir: outDir,
          predicted_class: files.predictedClass,
          confidence: files.confidence,
          files: [...Object.values(files.heatmaps), files.predJson, files.gtMaskPng],
        },
        null,
        2
      )
    );
    return 0;
  }
  if (command === "train") {
    const steps = parseInt(argValue(args, "--steps", "5"), 10);
    const seed = parseInt(argValue(args, "--seed", "1"), 10);
    const size = parseInt(argValue(args, "--size", "16"), 10);
    const lr = parseFloat(argValue(args, "--lr", "0.0001"));
    const net = tinyNet(seed, size);
    const batch = [0, 1, 2].map((i) => syntheticSample(seed + i, size, i));
    const optimizer = new Adam({ lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 });
    for (let s = 0; s < steps; s++) {
      const loss = trainStep(net, batch, optimizer, net.spec.lambda);
      console.log(
        `step ${s + 1}: total=${loss.total.toFixed(4)} ce=${loss.ce.toFixed(4)} dice=${loss.dice.toFixed(4)}`
      );
    }
    return 0;
  }
  console.error("usage: cli.js export [--out-dir D] [--seed N] [--size S] | train [--steps N]");
  return 2;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
