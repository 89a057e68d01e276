import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { exportSample, METHODS } from "../src/export";
import { CLASS_NAMES, tinyNet } from "../src/model";
import { syntheticSample } from "../src/synthetic";

function tmpDir(tag: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `exporter-${tag}-`));
}

test("exportSample writes three heatmaps, pred.json and the mask", () => {
  const net = tinyNet(12, 32);
  const { image, mask } = syntheticSample(12, 32);
  const dir = tmpDir("files");
  const files = exportSample(net, image, mask, dir, "dualhead-tiny");

  for (const method of METHODS) {
    const p = files.heatmaps[method];
    assert.equal(path.basename(p), `heatmap_${method}.npy`);
    assert.ok(fs.existsSync(p));
    const bytes = fs.readFileSync(p);
    assert.equal(bytes.subarray(0, 6).toString("latin1"), "\x93NUMPY");
  }
  const pred = JSON.parse(fs.readFileSync(files.predJson, "utf-8"));
  assert.deepEqual(Object.keys(pred).sort(), ["confidence", "model_name", "predicted_class"]);
  assert.ok((CLASS_NAMES as readonly string[]).includes(pred.predicted_class));
  assert.ok(pred.confidence > 0 && pred.confidence <= 1);
  assert.equal(pred.model_name, "dualhead-tiny");

  const png = fs.readFileSync(files.gtMaskPng);
  assert.deepEqual([...png.subarray(0, 8)], [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
});

test("exported heatmap values are already in [0, 1] (no downstream rescale needed)", () => {
  const net = tinyNet(13, 24);
  const { image, mask } = syntheticSample(13, 24);
  const dir = tmpDir("range");
  const files = exportSample(net, image, mask, dir);
  for (const method of METHODS) {
    const bytes = fs.readFileSync(files.heatmaps[method]);
    const headerLen = bytes.readUInt16LE(8);
    const payload = bytes.subarray(10 + headerLen);
    let min = Infinity;
    let max = -Infinity;
    for (let i = 0; i < payload.length; i += 4) {
      const v = payload.readFloatLE(i);
      min = Math.min(min, v);
      max = Math.max(max, v);
    }
    assert.ok(min >= 0 && max <= 1, `${method}: range [${min}, ${max}]`);
  }
});

test("export is deterministic for a fixed seed", () => {
  const a = tmpDir("det-a");
  const b = tmpDir("det-b");
  exportSample(tinyNet(5, 24), syntheticSample(5, 24).image, syntheticSample(5, 24).mask, a);
  exportSample(tinyNet(5, 24), syntheticSample(5, 24).image, syntheticSample(5, 24).mask, b);
  for (const name of fs.readdirSync(a)) {
    assert.deepEqual(fs.readFileSync(path.join(a, name)), fs.readFileSync(path.join(b, name)), name);
  }
});
