/**
 * NPY v1.0 writer (little-endian, C order) for float32 2D heatmaps.
 * Header layout matches numpy's own writer byte for byte.
 */

import * as fs from "fs";

export function npyBytesFloat32(rows: number, cols: number, values: Float64Array | number[]): Buffer {
  if (values.length !== rows * cols) {
    throw new Error(`value count ${values.length} != ${rows}x${cols}`);
  }
  const headerText = `{'descr': '<f4', 'fortran_order': False, 'shape': (${rows}, ${cols}), }`;
  const unpadded = 6 + 2 + 2 + headerText.length + 1;
  const header = headerText + " ".repeat((64 - (unpadded % 64)) % 64) + "\n";
  const payload = Buffer.alloc(rows * cols * 4);
  for (let i = 0; i < values.length; i++) {
    payload.writeFloatLE(Math.fround(values[i] as number), i * 4);
  }
  return Buffer.concat([
    Buffer.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59, 1, 0]), // \x93NUMPY v1.0
    (() => {
      const b = Buffer.alloc(2);
      b.writeUInt16LE(header.length, 0);
      return b;
    })(),
    Buffer.from(header, "latin1"),
    payload,
  ]);
}

export function writeNpyFloat32(
  path: string,
  rows: number,
  cols: number,
  values: Float64Array | number[]
): void {
  fs.writeFileSync(path, npyBytesFloat32(rows, cols, values));
}
