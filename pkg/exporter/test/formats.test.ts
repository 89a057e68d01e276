import assert from "node:assert/strict";
import { test } from "node:test";
import * as zlib from "node:zlib";

import { npyBytesFloat32 } from "../src/npy";
import { pngBytesGray8 } from "../src/png";

test("NPY header is v1.0, 64-byte aligned, with the declared shape", () => {
  const bytes = npyBytesFloat32(3, 5, new Float64Array(15).fill(0.25));
  assert.equal(bytes.subarray(0, 6).toString("latin1"), "\x93NUMPY");
  assert.equal(bytes[6], 1);
  assert.equal(bytes[7], 0);
  const headerLen = bytes.readUInt16LE(8);
  assert.equal((10 + headerLen) % 64, 0);
  const header = bytes.subarray(10, 10 + headerLen).toString("latin1");
  assert.match(header, /'descr': '<f4'/);
  assert.match(header, /'fortran_order': False/);
  assert.match(header, /'shape': \(3, 5\)/);
  assert.equal(bytes.length, 10 + headerLen + 15 * 4);
});

test("NPY payload is little-endian float32 of the given values", () => {
  const values = [0, 0.5, 1, 0.25];
  const bytes = npyBytesFloat32(2, 2, values);
  const headerLen = bytes.readUInt16LE(8);
  const payload = bytes.subarray(10 + headerLen);
  for (let i = 0; i < 4; i++) {
    assert.equal(payload.readFloatLE(i * 4), Math.fround(values[i]));
  }
});

test("PNG bytes carry a valid signature, IHDR and stored-deflate scanlines", () => {
  const pixels = Uint8Array.from([0, 64, 128, 255, 10, 20]);
  const bytes = pngBytesGray8(2, 3, pixels);
  assert.deepEqual(
    [...bytes.subarray(0, 8)],
    [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]
  );
  // IHDR
  assert.equal(bytes.readUInt32BE(8), 13);
  assert.equal(bytes.subarray(12, 16).toString("latin1"), "IHDR");
  assert.equal(bytes.readUInt32BE(16), 3); // width
  assert.equal(bytes.readUInt32BE(20), 2); // height
  assert.equal(bytes[24], 8); // bit depth
  assert.equal(bytes[25], 0); // grayscale
  // IDAT: inflate and check raw scanlines (filter byte 0 per row)
  const idatLen = bytes.readUInt32BE(33);
  assert.equal(bytes.subarray(37, 41).toString("latin1"), "IDAT");
  const idat = bytes.subarray(41, 41 + idatLen);
  const raw = zlib.inflateSync(idat);
  assert.deepEqual([...raw], [0, 0, 64, 128, 0, 255, 10, 20]);
});

test("PNG and NPY writers are deterministic", () => {
  const pixels = Uint8Array.from({ length: 64 }, (_, i) => (i * 37) % 256);
  assert.deepEqual(pngBytesGray8(8, 8, pixels), pngBytesGray8(8, 8, pixels));
  const values = Float64Array.from({ length: 16 }, (_, i) => i / 16);
  assert.deepEqual(npyBytesFloat32(4, 4, values), npyBytesFloat32(4, 4, values));
});
