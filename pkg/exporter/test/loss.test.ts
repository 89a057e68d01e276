import assert from "node:assert/strict";
import { test } from "node:test";

import { compositeLoss, compositeLossBackward, crossEntropy, diceLoss } from "../src/loss";
import { tinyNet } from "../src/model";
import { syntheticSample } from "../src/synthetic";
import { Tensor } from "../src/tensor";

function uniformNet(size = 16) {
  const net = tinyNet(5, size);
  net.clfWeight.data.fill(0);
  net.clfBias.data.fill(0);
  return net;
}

test("lambda = 0 reduces the composite loss to pure cross-entropy", () => {
  const net = tinyNet(2, 16);
  const { image, mask, label } = syntheticSample(2, 16);
  const result = net.forward(image);
  const loss = compositeLoss(result, label, mask, 0, 1e-6);
  assert.ok(Math.abs(loss.total - crossEntropy(result.probs, label)) <= 1e-7);
  assert.equal(loss.total, loss.ce);
});

test("uniform 3-class prediction has cross-entropy ln 3", () => {
  const net = uniformNet();
  const { image, mask, label } = syntheticSample(7, 16);
  const result = net.forward(image);
  for (const p of result.probs.data) assert.ok(Math.abs(p - 1 / 3) < 1e-12);
  const loss = compositeLoss(result, label, mask, 0, 1e-6);
  assert.ok(Math.abs(loss.total - Math.log(3)) <= 1e-6);
});

test("perfect prediction on both heads gives near-zero loss", () => {
  const probs = Tensor.fromArray([3], [0, 1, 0]);
  assert.ok(Math.abs(crossEntropy(probs, 1)) < 1e-15);
  const mask = Tensor.fromArray([2, 2], [1, 0, 0, 1]);
  assert.ok(diceLoss(mask, mask.clone(), 1e-6) < 1e-6);
});

test("composite loss is non-negative and splits into its terms", () => {
  const net = tinyNet(3, 16);
  const { image, mask, label } = syntheticSample(3, 16);
  const result = net.forward(image);
  const loss = compositeLoss(result, label, mask, 0.7, 1e-6);
  assert.ok(loss.total >= 0);
  assert.ok(Math.abs(loss.total - (loss.ce + 0.7 * loss.dice)) < 1e-12);
});

test("analytic gradients match central finite differences within 1e-4 relative", () => {
  const net = tinyNet(11, 8);
  const { image, mask, label } = syntheticSample(11, 8);
  const lambda = 1.0;
  const epsilon = 1e-6;

  const { grads } = compositeLossBackward(net, net.forward(image), label, mask, lambda, epsilon);

  const lossAt = () => compositeLoss(net.forward(image), label, mask, lambda, epsilon).total;

  let checked = 0;
  let worst = 0;
  const h = 1e-6;
  for (const param of net.params()) {
    // probe a deterministic spread of indices in every tensor
    const stride = Math.max(1, Math.floor(param.tensor.size / 3));
    for (let i = 0; i < param.tensor.size; i += stride) {
      const saved = param.tensor.data[i];
      param.tensor.data[i] = saved + h;
      const plus = lossAt();
      param.tensor.data[i] = saved - h;
      const minus = lossAt();
      param.tensor.data[i] = saved;
      const fd = (plus - minus) / (2 * h);
      const analytic = grads[param.name].data[i];
      const scale = Math.max(Math.abs(fd), Math.abs(analytic), 1e-6);
      const rel = Math.abs(fd - analytic) / scale;
      worst = Math.max(worst, rel);
      assert.ok(
        rel <= 1e-4,
        `${param.name}[${i}]: analytic ${analytic} vs finite-diff ${fd} (rel ${rel})`
      );
      checked += 1;
    }
  }
  assert.ok(checked >= 30, `checked only ${checked} coordinates`);
});

test("mask shape mismatch is rejected", () => {
  const net = tinyNet(2, 16);
  const { image, label } = syntheticSample(2, 16);
  const result = net.forward(image);
  const wrong = Tensor.zeros([8, 8]);
  assert.throws(() => compositeLoss(result, label, wrong, 1, 1e-6), /mismatch/);
});
