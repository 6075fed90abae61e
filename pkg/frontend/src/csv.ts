/** Headed CSV writing with full-precision doubles (round-trip safe). */

import * as fs from "node:fs";

import { Matrix } from "./tensor.js";

const fmt = (v: number) => (Number.isInteger(v) ? String(v) : v.toPrecision(17));

export function writeCsv(filePath: string, header: string[], rows: number[][]): void {
  const lines = [header.join(",")];
  for (const row of rows) lines.push(row.map(fmt).join(","));
  fs.writeFileSync(filePath, lines.join("\n") + "\n");
}

export function writeMatrixCsv(filePath: string, header: string[], matrix: Matrix): void {
  const lines = [header.join(",")];
  for (let i = 0; i < matrix.rows; i++) {
    const parts: string[] = [];
    for (let j = 0; j < matrix.cols; j++) parts.push(fmt(matrix.data[i * matrix.cols + j]));
    lines.push(parts.join(","));
  }
  fs.writeFileSync(filePath, lines.join("\n") + "\n");
}

export function readMatrixCsv(filePath: string): { header: string[]; rows: number[][] } {
  const lines = fs.readFileSync(filePath, "utf8").trim().split("\n");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(",").map(Number));
  return { header, rows };
}
