#!/usr/bin/env node
/**
 * vae-train: train the MNIST VAE, sweep latent dimensions, export weights
 * and encodings in the sampling backend's file formats.
 *
 *   vae-train train --data DIR --latent-dim 12 --out DIR [--epochs 50]
 *       [--batch 128] [--hidden 512,512] [--lr 0.001] [--seed 0] [--limit N]
 *       [--stem mnist_vae]
 *   vae-train dim-sweep --data DIR --dims 4,8,12,16 --out DIR [...]
 *       [--save-models]
 *   vae-train export-encodings --weights STEM --data DIR --out DIR [--limit N]
 *
 * --data expects standard IDX files (train-images-idx3-ubyte[.gz],
 * t10k-images-idx3-ubyte[.gz]).  Exit codes: 0 ok, 1 usage error, 2 failure.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { writeCsv, writeMatrixCsv } from "./csv.js";
import { loadTestImages, loadTrainingImages } from "./mnist.js";
import { zeros } from "./tensor.js";
import {
  EpochRow,
  dimSweep,
  encodeDataset,
  encodedMeanCovarianceTrace,
  train,
} from "./train.js";
import { loadWeights, networkForward, saveWeights } from "./weights.js";

class UsageError extends Error {}

interface Args {
  positional: string[];
  flags: Map<string, string | boolean>;
}

function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const key = arg.slice(2);
      const next = argv[i + 1];
      if (next !== undefined && !next.startsWith("--")) {
        flags.set(key, next);
        i++;
      } else {
        flags.set(key, true);
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function requireFlag(args: Args, name: string): string {
  const value = args.flags.get(name);
  if (typeof value !== "string") throw new UsageError(`--${name} is required`);
  return value;
}

function intFlag(args: Args, name: string, fallback: number): number {
  const value = args.flags.get(name);
  if (value === undefined || value === true) return fallback;
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) throw new UsageError(`--${name} must be a number`);
  return parsed;
}

function listFlag(args: Args, name: string, fallback: number[]): number[] {
  const value = args.flags.get(name);
  if (typeof value !== "string") return fallback;
  return value.split(",").map((v) => {
    const parsed = Number(v);
    if (!Number.isFinite(parsed)) throw new UsageError(`--${name}: bad entry ${v}`);
    return parsed;
  });
}

function outDir(args: Args): string {
  const dir = args.flags.get("out");
  if (typeof dir !== "string") throw new UsageError("--out is required");
  fs.mkdirSync(dir, { recursive: true });
  return dir;
}

function writeRunManifest(dir: string, command: string, parameters: Record<string, unknown>): void {
  const manifest = { command, tool: "vae-train 0.1.0", parameters };
  fs.writeFileSync(path.join(dir, "run_manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
}

function historyCsv(dir: string, history: EpochRow[]): void {
  writeCsv(
    path.join(dir, "loss_curve.csv"),
    ["epoch", "train_loss", "train_reconstruction", "train_kl", "val_loss"],
    history.map((r) => [r.epoch, r.trainLoss, r.trainReconstruction, r.trainKl, r.valLoss]),
  );
}

function encodingsHeader(m: number): string[] {
  const header: string[] = [];
  for (let j = 1; j <= m; j++) header.push(`mu_${j}`);
  for (let j = 1; j <= m; j++) header.push(`logvar_${j}`);
  return header;
}

function cmdTrain(args: Args): number {
  const dir = outDir(args);
  const dataDir = requireFlag(args, "data");
  const latentDim = intFlag(args, "latent-dim", 12);
  const epochs = intFlag(args, "epochs", 50);
  const batchSize = intFlag(args, "batch", 128);
  const seed = intFlag(args, "seed", 0);
  const limit = intFlag(args, "limit", 0) || undefined;
  const hidden = listFlag(args, "hidden", [512, 512]);
  const lr = Number(args.flags.get("lr") ?? 1e-3);
  const stem = String(args.flags.get("stem") ?? "mnist_vae");

  const dataset = loadTrainingImages(dataDir, limit);
  console.log(`training on ${dataset.count} images (${dataset.rows}x${dataset.cols})`);
  const result = train(
    {
      latentDim,
      hidden,
      epochs,
      batchSize,
      learningRate: lr,
      seed,
      onEpoch: (row) =>
        console.log(
          `epoch ${row.epoch}/${epochs}: train ${row.trainLoss.toFixed(4)} ` +
            `(recon ${row.trainReconstruction.toFixed(4)} + kl ${row.trainKl.toFixed(4)}), ` +
            `val ${row.valLoss.toFixed(4)}`,
        ),
    },
    dataset,
  );
  const { manifestPath, blobPath } = saveWeights(path.join(dir, stem), result.model);
  historyCsv(dir, result.history);
  writeRunManifest(dir, "train", {
    data: dataDir, latentDim, hidden, epochs, batchSize, seed, lr,
    limit: limit ?? null, trainCount: result.trainCount, valCount: result.valCount,
    finalValLoss: result.valLoss, decoderLogVar: result.model.decoderLogVar,
    weights: [path.basename(manifestPath), path.basename(blobPath)],
  });
  console.log(`wrote ${manifestPath}, ${blobPath}, loss_curve.csv`);
  return 0;
}

function cmdDimSweep(args: Args): number {
  const dir = outDir(args);
  const dataDir = requireFlag(args, "data");
  const dims = listFlag(args, "dims", [4, 8, 12, 16]);
  const epochs = intFlag(args, "epochs", 50);
  const batchSize = intFlag(args, "batch", 128);
  const seed = intFlag(args, "seed", 0);
  const limit = intFlag(args, "limit", 0) || undefined;
  const hidden = listFlag(args, "hidden", [512, 512]);
  const saveModels = args.flags.get("save-models") === true;

  const dataset = loadTrainingImages(dataDir, limit);
  let testSet;
  try {
    testSet = loadTestImages(dataDir, limit);
  } catch {
    testSet = undefined; // trace falls back to the training images
  }
  const sweep = dimSweep(
    dims,
    { hidden, epochs, batchSize, seed },
    dataset,
    testSet,
    (msg) => console.warn(`warning: ${msg}`),
  );
  writeCsv(
    path.join(dir, "dim_sweep.csv"),
    ["latent_dim", "val_loss", "encoded_mean_covariance_trace"],
    sweep.rows.map((r) => [r.latentDim, r.valLoss, r.covarianceTrace]),
  );
  if (saveModels) {
    for (const [dim, model] of sweep.models) {
      saveWeights(path.join(dir, `mnist_vae_m${dim}`), model);
    }
  }
  writeRunManifest(dir, "dim-sweep", {
    data: dataDir, dims, epochs, batchSize, seed, hidden,
    duplicatesDropped: sweep.duplicatesDropped,
  });
  console.log(`wrote dim_sweep.csv (${sweep.rows.length} rows)`);
  return 0;
}

function cmdExportEncodings(args: Args): number {
  const dir = outDir(args);
  const stem = requireFlag(args, "weights");
  const dataDir = requireFlag(args, "data");
  const limit = intFlag(args, "limit", 0) || undefined;

  const weights = loadWeights(stem);
  if (!weights.encoderMean || !weights.encoderLogVar) {
    throw new Error("weights file carries no encoder networks");
  }
  const testSet = loadTestImages(dataDir, limit);
  const m = weights.latentDim;
  const n = testSet.count;
  const out = zeros(n, 2 * m);
  const chunkSize = 512;
  for (let start = 0; start < n; start += chunkSize) {
    const end = Math.min(start + chunkSize, n);
    const x = {
      rows: end - start,
      cols: testSet.images.cols,
      data: testSet.images.data.slice(start * testSet.images.cols, end * testSet.images.cols),
    };
    const means = networkForward(weights.encoderMean, x);
    const logVars = networkForward(weights.encoderLogVar, x);
    for (let i = 0; i < end - start; i++) {
      for (let j = 0; j < m; j++) {
        out.data[(start + i) * 2 * m + j] = means.data[i * m + j];
        out.data[(start + i) * 2 * m + m + j] = logVars.data[i * m + j];
      }
    }
  }
  writeMatrixCsv(path.join(dir, "encodings.csv"), encodingsHeader(m), out);
  const { trace, perDim } = encodedMeanCovarianceTrace({
    rows: n,
    cols: m,
    data: out.data.filter((_, idx) => idx % (2 * m) < m),
  });
  writeRunManifest(dir, "export-encodings", {
    weights: stem, data: dataDir, count: n, latentDim: m,
    encodedMeanCovarianceTrace: trace,
    perDimVariances: Array.from(perDim),
  });
  console.log(`wrote encodings.csv (${n} rows, trace ${trace.toFixed(3)})`);
  return 0;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  const command = args.positional[0];
  try {
    switch (command) {
      case "train":
        return cmdTrain(args);
      case "dim-sweep":
        return cmdDimSweep(args);
      case "export-encodings":
        return cmdExportEncodings(args);
      default:
        throw new UsageError(
          `unknown command ${command ?? "(none)"}; expected train | dim-sweep | export-encodings`,
        );
    }
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  path.resolve(process.argv[1]) === fileURLToPath(import.meta.url);
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
