/**
 * Training loop, latent-dimension sweep and encodings export.
 *
 * Defaults correspond to the reference setup: two 512-wide hidden layers,
 * Adam with default parameters, minibatch 128, 50 epochs, pixels in [0, 1].
 * The train/validation split is fixed (50k/10k on full MNIST, a 5:1 split on
 * smaller sets) with the shuffle seed recorded in the outputs.
 */

import { ImageSet } from "./mnist.js";
import { Matrix, Rng, sliceRows, zeros } from "./tensor.js";
import { Adam, LossBreakdown, Vae } from "./vae.js";

export interface TrainConfig {
  latentDim: number;
  hidden?: number[];
  epochs?: number;
  batchSize?: number;
  learningRate?: number;
  seed?: number;
  logEvery?: number;
  onEpoch?: (row: EpochRow) => void;
}

export interface EpochRow {
  epoch: number;
  trainLoss: number;
  trainReconstruction: number;
  trainKl: number;
  valLoss: number;
}

export interface TrainResult {
  model: Vae;
  history: EpochRow[];
  valLoss: number;
  seed: number;
  trainCount: number;
  valCount: number;
}

export class DivergedError extends Error {
  epoch: number;
  constructor(epoch: number) {
    super(`training diverged (non-finite loss) at epoch ${epoch}`);
    this.epoch = epoch;
  }
}

function gatherRows(images: Matrix, indices: ArrayLike<number>, start: number, end: number): Matrix {
  const cols = images.cols;
  const out = zeros(end - start, cols);
  for (let i = start; i < end; i++) {
    const src = indices[i] * cols;
    out.data.set(images.data.subarray(src, src + cols), (i - start) * cols);
  }
  return out;
}

export function makeSplit(count: number, seed: number): { train: Uint32Array; val: Uint32Array } {
  const rng = new Rng(seed);
  const perm = rng.permutation(count);
  const valCount = count >= 60_000 ? 10_000 : Math.max(1, Math.floor(count / 6));
  return {
    val: perm.slice(0, valCount),
    train: perm.slice(valCount),
  };
}

export function train(config: TrainConfig, dataset: ImageSet): TrainResult {
  const seed = config.seed ?? 0;
  const hidden = config.hidden ?? [512, 512];
  const epochs = config.epochs ?? 50;
  const batchSize = config.batchSize ?? 128;
  const inputDim = dataset.rows * dataset.cols;
  const rng = new Rng(seed);
  const model = new Vae({ inputDim, latentDim: config.latentDim, hidden }, rng);
  const { values: params } = model.parameters();
  const paramSizes = params.map((p) => p.length);
  paramSizes.push(1); // decoder log-variance scalar
  const adam = new Adam(paramSizes, config.learningRate ?? 1e-3);

  const { train: trainIdx, val: valIdx } = makeSplit(dataset.count, seed);
  const valBatch = gatherRows(dataset.images, valIdx, 0, valIdx.length);

  const history: EpochRow[] = [];
  const scalarHolder = new Float64Array(1);
  const gradHolder = new Float64Array(1);
  for (let epoch = 1; epoch <= epochs; epoch++) {
    const order = rng.permutation(trainIdx.length);
    let sumLoss = 0;
    let sumRecon = 0;
    let sumKl = 0;
    let batches = 0;
    for (let start = 0; start < trainIdx.length; start += batchSize) {
      const end = Math.min(start + batchSize, trainIdx.length);
      const batchIdx = new Uint32Array(end - start);
      for (let i = start; i < end; i++) batchIdx[i - start] = trainIdx[order[i]];
      const x = gatherRows(dataset.images, batchIdx, 0, batchIdx.length);
      const eps = zeros(x.rows, config.latentDim);
      for (let i = 0; i < eps.data.length; i++) eps.data[i] = rng.gaussian();

      model.zeroGrads();
      const { loss, reconstruction, kl } = model.lossAndGradients(x, eps);
      if (!Number.isFinite(loss)) throw new DivergedError(epoch);
      scalarHolder[0] = model.decoderLogVar;
      gradHolder[0] = model.gradDecoderLogVar;
      adam.step([...params, scalarHolder], [...model.gradients(), gradHolder]);
      model.decoderLogVar = scalarHolder[0];

      sumLoss += loss;
      sumRecon += reconstruction;
      sumKl += kl;
      batches += 1;
    }
    const valLoss = model.evaluateLoss(valBatch, new Rng(seed + 7919 * epoch)).loss;
    if (!Number.isFinite(valLoss)) throw new DivergedError(epoch);
    const row: EpochRow = {
      epoch,
      trainLoss: sumLoss / batches,
      trainReconstruction: sumRecon / batches,
      trainKl: sumKl / batches,
      valLoss,
    };
    history.push(row);
    config.onEpoch?.(row);
  }
  return {
    model,
    history,
    valLoss: history[history.length - 1].valLoss,
    seed,
    trainCount: trainIdx.length,
    valCount: valIdx.length,
  };
}

export interface EncodedSet {
  means: Matrix;
  logVars: Matrix;
}

/** Encoder means and log-variances for every image (batched in chunks). */
export function encodeDataset(model: Vae, dataset: ImageSet, chunk = 512): EncodedSet {
  const m = model.arch.latentDim;
  const means = zeros(dataset.count, m);
  const logVars = zeros(dataset.count, m);
  for (let start = 0; start < dataset.count; start += chunk) {
    const end = Math.min(start + chunk, dataset.count);
    const x = sliceRows(dataset.images, start, end);
    const { mean, logVar } = model.encode(x);
    means.data.set(mean.data, start * m);
    logVars.data.set(logVar.data, start * m);
  }
  return { means, logVars };
}

/** Trace of the sample covariance of encoder means, plus per-dim variances. */
export function encodedMeanCovarianceTrace(means: Matrix): { trace: number; perDim: Float64Array } {
  const { rows: n, cols: m } = means;
  if (n < 2) throw new Error("need at least 2 encodings");
  const mu = new Float64Array(m);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < m; j++) mu[j] += means.data[i * m + j];
  }
  for (let j = 0; j < m; j++) mu[j] /= n;
  const perDim = new Float64Array(m);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < m; j++) {
      const d = means.data[i * m + j] - mu[j];
      perDim[j] += d * d;
    }
  }
  let trace = 0;
  for (let j = 0; j < m; j++) {
    perDim[j] /= n - 1;
    trace += perDim[j];
  }
  return { trace, perDim };
}

export interface SweepRow {
  latentDim: number;
  valLoss: number;
  covarianceTrace: number;
}

export interface SweepResult {
  rows: SweepRow[];
  duplicatesDropped: number[];
  models: Map<number, Vae>;
}

/** One trained model per latent dimension; duplicates dedupe with a warning. */
export function dimSweep(
  dims: number[],
  config: Omit<TrainConfig, "latentDim">,
  dataset: ImageSet,
  testSet?: ImageSet,
  warn: (msg: string) => void = console.warn,
): SweepResult {
  const seen = new Set<number>();
  const duplicatesDropped: number[] = [];
  const rows: SweepRow[] = [];
  const models = new Map<number, Vae>();
  for (const dim of dims) {
    if (seen.has(dim)) {
      duplicatesDropped.push(dim);
      warn(`duplicate latent dimension ${dim} dropped from sweep`);
      continue;
    }
    seen.add(dim);
    const result = train({ ...config, latentDim: dim }, dataset);
    const encodeOn = testSet ?? dataset;
    const { means } = encodeDataset(result.model, encodeOn);
    const { trace } = encodedMeanCovarianceTrace(means);
    rows.push({ latentDim: dim, valLoss: result.valLoss, covarianceTrace: trace });
    models.set(dim, result.model);
  }
  return { rows, duplicatesDropped, models };
}
