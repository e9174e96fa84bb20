/**
 * Binary token-file codec: magic "OVTK", version, token width (2 or 4
 * bytes), vocab size, boundary id as little-endian u32 header fields,
 * then the boundary-separated token payload.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const OVTK_MAGIC = "OVTK";
export const OVTK_VERSION = 1;
const HEADER_BYTES = 20;

export function writeTokenFile(
  path: string,
  docs: number[][],
  vocabSize: number,
  boundaryId: number,
): void {
  if (boundaryId >= vocabSize) {
    throw new Error(`boundary id ${boundaryId} not below vocab size ${vocabSize}`);
  }
  const width = vocabSize <= 1 << 16 ? 2 : 4;
  let total = 0;
  for (const doc of docs) total += doc.length;
  const payload = Buffer.alloc((total + Math.max(docs.length - 1, 0)) * width);
  let off = 0;
  const put = (t: number) => {
    if (t < 0 || t >= vocabSize) {
      throw new Error(`token id ${t} outside [0, ${vocabSize})`);
    }
    if (width === 2) payload.writeUInt16LE(t, off);
    else payload.writeUInt32LE(t, off);
    off += width;
  };
  docs.forEach((doc, i) => {
    if (i > 0) put(boundaryId);
    for (const t of doc) {
      if (t === boundaryId) {
        throw new Error(`document ${i} contains the boundary id ${boundaryId}`);
      }
      put(t);
    }
  });
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(OVTK_MAGIC, 0, "ascii");
  header.writeUInt32LE(OVTK_VERSION, 4);
  header.writeUInt32LE(width, 8);
  header.writeUInt32LE(vocabSize, 12);
  header.writeUInt32LE(boundaryId, 16);
  writeFileSync(path, Buffer.concat([header, payload]));
}

export function readTokenFile(path: string): {
  vocabSize: number;
  boundaryId: number;
  docs: number[][];
} {
  const data = readFileSync(path);
  if (data.length < HEADER_BYTES || data.toString("ascii", 0, 4) !== OVTK_MAGIC) {
    throw new Error(`${path}: not a token file`);
  }
  const width = data.readUInt32LE(8);
  const vocabSize = data.readUInt32LE(12);
  const boundaryId = data.readUInt32LE(16);
  const docs: number[][] = [];
  let run: number[] = [];
  for (let off = HEADER_BYTES; off < data.length; off += width) {
    const t = width === 2 ? data.readUInt16LE(off) : data.readUInt32LE(off);
    if (t === boundaryId) {
      if (run.length) docs.push(run);
      run = [];
    } else {
      run.push(t);
    }
  }
  if (run.length) docs.push(run);
  return { vocabSize, boundaryId, docs };
}
