/**
 * 8-bit grayscale PNG writer.  The IDAT stream uses stored (that is,
 * uncompressed) deflate blocks so output bytes never depend on a zlib
 * implementation; any standard decoder reads them fine.
 */

import * as fs from "fs";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(buf: Buffer): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < buf.length; i++) {
    a = (a + buf[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function chunk(kind: string, payload: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(payload.length, 0);
  const body = Buffer.concat([Buffer.from(kind, "latin1"), payload]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body), 0);
  return Buffer.concat([head, body, crc]);
}

function deflateStored(data: Buffer): Buffer {
  const parts: Buffer[] = [Buffer.from([0x78, 0x01])];
  let pos = 0;
  for (;;) {
    const block = data.subarray(pos, pos + 65535);
    pos += block.length;
    const final = pos >= data.length ? 1 : 0;
    const head = Buffer.alloc(5);
    head[0] = final;
    head.writeUInt16LE(block.length, 1);
    head.writeUInt16LE(~block.length & 0xffff, 3);
    parts.push(head, block);
    if (final) break;
  }
  const tail = Buffer.alloc(4);
  tail.writeUInt32BE(adler32(data), 0);
  parts.push(tail);
  return Buffer.concat(parts);
}

export function pngBytesGray8(rows: number, cols: number, pixels: Uint8Array): Buffer {
  if (pixels.length !== rows * cols) {
    throw new Error(`pixel count ${pixels.length} != ${rows}x${cols}`);
  }
  const raw = Buffer.alloc(rows * (cols + 1));
  for (let r = 0; r < rows; r++) {
    raw[r * (cols + 1)] = 0; // filter: None
    Buffer.from(pixels.buffer, pixels.byteOffset + r * cols, cols).copy(raw, r * (cols + 1) + 1);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(cols, 0);
  ihdr.writeUInt32BE(rows, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateStored(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export function writePngGray8(path: string, rows: number, cols: number, pixels: Uint8Array): void {
  fs.writeFileSync(path, pngBytesGray8(rows, cols, pixels));
}
