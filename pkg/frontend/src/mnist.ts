/**
 * IDX file reading (the standard MNIST container), with transparent gzip.
 * Pixels normalize to [0, 1].
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as zlib from "node:zlib";

import { Matrix } from "./tensor.js";

const MAGIC_IMAGES = 0x0803;
const MAGIC_LABELS = 0x0801;

function readIdxBytes(filePath: string): Buffer {
  const raw = fs.readFileSync(filePath);
  return filePath.endsWith(".gz") ? zlib.gunzipSync(raw) : raw;
}

export interface ImageSet {
  count: number;
  rows: number;
  cols: number;
  /** (count, rows*cols) in [0, 1] */
  images: Matrix;
}

export function readIdxImages(filePath: string): ImageSet {
  const buf = readIdxBytes(filePath);
  if (buf.readUInt32BE(0) !== MAGIC_IMAGES) {
    throw new Error(`${filePath}: not an IDX image file`);
  }
  const count = buf.readUInt32BE(4);
  const rows = buf.readUInt32BE(8);
  const cols = buf.readUInt32BE(12);
  const pixels = rows * cols;
  if (buf.length < 16 + count * pixels) {
    throw new Error(`${filePath}: truncated IDX image file`);
  }
  const data = new Float64Array(count * pixels);
  for (let i = 0; i < count * pixels; i++) data[i] = buf[16 + i] / 255;
  return { count, rows, cols, images: { rows: count, cols: pixels, data } };
}

export function readIdxLabels(filePath: string): Uint8Array {
  const buf = readIdxBytes(filePath);
  if (buf.readUInt32BE(0) !== MAGIC_LABELS) {
    throw new Error(`${filePath}: not an IDX label file`);
  }
  const count = buf.readUInt32BE(4);
  return Uint8Array.from(buf.subarray(8, 8 + count));
}

export function writeIdxImages(filePath: string, set: ImageSet): void {
  const pixels = set.rows * set.cols;
  const buf = Buffer.alloc(16 + set.count * pixels);
  buf.writeUInt32BE(MAGIC_IMAGES, 0);
  buf.writeUInt32BE(set.count, 4);
  buf.writeUInt32BE(set.rows, 8);
  buf.writeUInt32BE(set.cols, 12);
  for (let i = 0; i < set.count * pixels; i++) {
    buf[16 + i] = Math.max(0, Math.min(255, Math.round(set.images.data[i] * 255)));
  }
  fs.writeFileSync(filePath, buf);
}

/** Locate an IDX file by stem inside a directory (plain or gzipped). */
export function findIdx(dir: string, stem: string): string {
  for (const suffix of ["", ".gz"]) {
    for (const name of [`${stem}-idx3-ubyte`, `${stem}-idx1-ubyte`, stem]) {
      const candidate = path.join(dir, name + suffix);
      if (fs.existsSync(candidate)) return candidate;
    }
  }
  throw new Error(`no IDX file for ${stem} under ${dir}`);
}

export function loadTrainingImages(dir: string, limit?: number): ImageSet {
  const set = readIdxImages(findIdx(dir, "train-images"));
  return limit && limit < set.count ? sliceImageSet(set, limit) : set;
}

export function loadTestImages(dir: string, limit?: number): ImageSet {
  const set = readIdxImages(findIdx(dir, "t10k-images"));
  return limit && limit < set.count ? sliceImageSet(set, limit) : set;
}

export function sliceImageSet(set: ImageSet, count: number): ImageSet {
  const pixels = set.rows * set.cols;
  return {
    count,
    rows: set.rows,
    cols: set.cols,
    images: { rows: count, cols: pixels, data: set.images.data.slice(0, count * pixels) },
  };
}
