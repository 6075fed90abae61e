/**
 * Gaussian-encoder / Gaussian-decoder VAE on fully connected relu networks.
 *
 * Encoder: x -> relu trunk -> a 2m-wide linear head whose first m outputs are
 * the posterior mean and last m the log-variance.  Decoder: z -> relu trunk
 * -> linear mean in pixel space; the decoder noise is a single trainable
 * scalar log-variance.  The training objective is the negative ELBO
 *
 *   L = E_q[ -log p(x|z) ] + KL(q(z|x) || N(0, I)),
 *
 * with the KL term in closed form and the expectation estimated with one
 * reparameterized sample z = mu + exp(logvar/2) * eps per datum.
 */

import {
  Matrix,
  Rng,
  addRowVectorInPlace,
  columnSums,
  matmul,
  matmulTransposeA,
  matmulTransposeB,
  reluBackwardInPlace,
  reluInPlace,
  zeros,
} from "./tensor.js";

export type Activation = "relu" | "identity";

export class Dense {
  W: Matrix; // (outDim, inDim), row-major -- the on-disk orientation
  b: Float64Array;
  activation: Activation;
  gradW: Matrix;
  gradB: Float64Array;

  constructor(inDim: number, outDim: number, activation: Activation, rng: Rng) {
    const scale = activation === "relu" ? Math.sqrt(2 / inDim) : Math.sqrt(1 / inDim);
    this.W = zeros(outDim, inDim);
    for (let i = 0; i < this.W.data.length; i++) this.W.data[i] = scale * rng.gaussian();
    this.b = new Float64Array(outDim);
    this.activation = activation;
    this.gradW = zeros(outDim, inDim);
    this.gradB = new Float64Array(outDim);
  }

  /** Y = act(X W^T + b); X is (n, inDim). */
  forward(x: Matrix): Matrix {
    const y = matmulTransposeB(x, this.W);
    addRowVectorInPlace(y, this.b);
    if (this.activation === "relu") reluInPlace(y);
    return y;
  }

  /**
   * Accumulates gradW / gradB and returns dX.  ``y`` must be the activation
   * this layer produced in the forward pass (needed for the relu mask);
   * ``dY`` is consumed (mutated by the relu mask).
   */
  backward(dY: Matrix, x: Matrix, y: Matrix): Matrix {
    if (this.activation === "relu") reluBackwardInPlace(dY, y);
    const gW = matmulTransposeA(dY, x); // (outDim, inDim)
    for (let i = 0; i < this.gradW.data.length; i++) this.gradW.data[i] += gW.data[i];
    const gB = columnSums(dY);
    for (let i = 0; i < this.gradB.length; i++) this.gradB[i] += gB[i];
    return matmul(dY, this.W); // (n, inDim)
  }

  zeroGrads(): void {
    this.gradW.data.fill(0);
    this.gradB.fill(0);
  }
}

export interface VaeArchitecture {
  inputDim: number;
  latentDim: number;
  hidden: number[];
}

export interface LossBreakdown {
  loss: number;
  reconstruction: number;
  kl: number;
}

export class Vae {
  arch: VaeArchitecture;
  encoderTrunk: Dense[];
  encoderHead: Dense; // 2m outputs: [mean; logvar]
  decoderLayers: Dense[]; // trunk + identity mean output
  decoderLogVar: number; // global scalar log sigma_theta^2
  gradDecoderLogVar = 0;

  constructor(arch: VaeArchitecture, rng: Rng) {
    if (arch.latentDim < 1) throw new Error("latentDim must be >= 1");
    if (arch.hidden.length === 0) throw new Error("need at least one hidden layer");
    this.arch = arch;
    this.encoderTrunk = [];
    let dim = arch.inputDim;
    for (const h of arch.hidden) {
      this.encoderTrunk.push(new Dense(dim, h, "relu", rng));
      dim = h;
    }
    this.encoderHead = new Dense(dim, 2 * arch.latentDim, "identity", rng);
    this.decoderLayers = [];
    dim = arch.latentDim;
    const reversed = [...arch.hidden].reverse();
    for (const h of reversed) {
      this.decoderLayers.push(new Dense(dim, h, "relu", rng));
      dim = h;
    }
    this.decoderLayers.push(new Dense(dim, arch.inputDim, "identity", rng));
    this.decoderLogVar = 0;
  }

  parameters(): { values: Float64Array[]; names: string[] } {
    const values: Float64Array[] = [];
    const names: string[] = [];
    const push = (layer: Dense, tag: string) => {
      values.push(layer.W.data, layer.b);
      names.push(`${tag}.W`, `${tag}.b`);
    };
    this.encoderTrunk.forEach((l, i) => push(l, `enc${i}`));
    push(this.encoderHead, "encHead");
    this.decoderLayers.forEach((l, i) => push(l, `dec${i}`));
    return { values, names };
  }

  gradients(): Float64Array[] {
    const grads: Float64Array[] = [];
    for (const l of this.encoderTrunk) grads.push(l.gradW.data, l.gradB);
    grads.push(this.encoderHead.gradW.data, this.encoderHead.gradB);
    for (const l of this.decoderLayers) grads.push(l.gradW.data, l.gradB);
    return grads;
  }

  zeroGrads(): void {
    for (const l of this.encoderTrunk) l.zeroGrads();
    this.encoderHead.zeroGrads();
    for (const l of this.decoderLayers) l.zeroGrads();
    this.gradDecoderLogVar = 0;
  }

  /** Encoder means and log-variances for a batch (no sampling). */
  encode(x: Matrix): { mean: Matrix; logVar: Matrix } {
    let h = x;
    for (const l of this.encoderTrunk) h = l.forward(h);
    const head = this.encoderHead.forward(h);
    const m = this.arch.latentDim;
    const n = x.rows;
    const mean = zeros(n, m);
    const logVar = zeros(n, m);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < m; j++) {
        mean.data[i * m + j] = head.data[i * 2 * m + j];
        logVar.data[i * m + j] = head.data[i * 2 * m + m + j];
      }
    }
    return { mean, logVar };
  }

  /** Decoder mean for a batch of latents. */
  decodeMean(z: Matrix): Matrix {
    let h = z;
    for (const l of this.decoderLayers) h = l.forward(h);
    return h;
  }

  /**
   * Negative ELBO (mean over the batch) and parameter gradients.
   * ``eps`` injects the reparameterization noise; pass a fixed matrix to make
   * the loss deterministic (finite-difference checks, decomposition tests).
   */
  lossAndGradients(x: Matrix, eps: Matrix): LossBreakdown {
    const n = x.rows;
    const d = this.arch.inputDim;
    const m = this.arch.latentDim;
    if (eps.rows !== n || eps.cols !== m) throw new Error("eps must be (n, latentDim)");

    // ---- forward ----
    const encActs: Matrix[] = [x];
    let h = x;
    for (const l of this.encoderTrunk) {
      h = l.forward(h);
      encActs.push(h);
    }
    const head = this.encoderHead.forward(h);
    const mean = zeros(n, m);
    const logVar = zeros(n, m);
    const z = zeros(n, m);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < m; j++) {
        const mu = head.data[i * 2 * m + j];
        const lv = head.data[i * 2 * m + m + j];
        mean.data[i * m + j] = mu;
        logVar.data[i * m + j] = lv;
        z.data[i * m + j] = mu + Math.exp(0.5 * lv) * eps.data[i * m + j];
      }
    }
    const decActs: Matrix[] = [z];
    h = z;
    for (const l of this.decoderLayers) {
      h = l.forward(h);
      decActs.push(h);
    }
    const xHat = h;

    const s = this.decoderLogVar;
    const invVar = Math.exp(-s);
    let sqErr = 0;
    for (let i = 0; i < n * d; i++) {
      const r = xHat.data[i] - x.data[i];
      sqErr += r * r;
    }
    const reconstruction =
      0.5 * d * (Math.log(2 * Math.PI) + s) + (0.5 * invVar * sqErr) / n;
    let kl = 0;
    for (let i = 0; i < n * m; i++) {
      const mu = mean.data[i];
      const lv = logVar.data[i];
      kl += 0.5 * (mu * mu + Math.exp(lv) - 1 - lv);
    }
    kl /= n;
    const loss = reconstruction + kl;

    // ---- backward ----
    // reconstruction wrt decoder mean, already scaled by 1/n
    const dXHat = zeros(n, d);
    for (let i = 0; i < n * d; i++) {
      dXHat.data[i] = (invVar * (xHat.data[i] - x.data[i])) / n;
    }
    this.gradDecoderLogVar += 0.5 * d - (0.5 * invVar * sqErr) / n;

    let dH = dXHat;
    for (let li = this.decoderLayers.length - 1; li >= 0; li--) {
      dH = this.decoderLayers[li].backward(dH, decActs[li], decActs[li + 1]);
    }
    const dZ = dH; // (n, m)

    const dHead = zeros(n, 2 * m);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < m; j++) {
        const idx = i * m + j;
        const lv = logVar.data[idx];
        const dMu = dZ.data[idx] + mean.data[idx] / n;
        const dLv =
          dZ.data[idx] * 0.5 * Math.exp(0.5 * lv) * eps.data[idx] +
          (0.5 * (Math.exp(lv) - 1)) / n;
        dHead.data[i * 2 * m + j] = dMu;
        dHead.data[i * 2 * m + m + j] = dLv;
      }
    }
    let dEnc = this.encoderHead.backward(dHead, encActs[encActs.length - 1], head);
    for (let li = this.encoderTrunk.length - 1; li >= 0; li--) {
      dEnc = this.encoderTrunk[li].backward(dEnc, encActs[li], encActs[li + 1]);
    }

    return { loss, reconstruction, kl };
  }

  /** Negative ELBO only (fresh noise from ``rng``), for validation passes. */
  evaluateLoss(x: Matrix, rng: Rng): LossBreakdown {
    const eps = zeros(x.rows, this.arch.latentDim);
    for (let i = 0; i < eps.data.length; i++) eps.data[i] = rng.gaussian();
    const save = this.snapshotGrads();
    const out = this.lossAndGradients(x, eps);
    this.restoreGrads(save);
    return out;
  }

  private snapshotGrads(): Float64Array[] {
    const all = this.gradients().map((g) => g.slice());
    all.push(Float64Array.of(this.gradDecoderLogVar));
    return all;
  }

  private restoreGrads(saved: Float64Array[]): void {
    const grads = this.gradients();
    for (let i = 0; i < grads.length; i++) grads[i].set(saved[i]);
    this.gradDecoderLogVar = saved[saved.length - 1][0];
  }
}

/** Adam with the standard defaults (lr 1e-3, beta1 0.9, beta2 0.999). */
export class Adam {
  lr: number;
  beta1 = 0.9;
  beta2 = 0.999;
  epsilon = 1e-8;
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(parameterSizes: number[], lr = 1e-3) {
    this.lr = lr;
    this.m = parameterSizes.map((s) => new Float64Array(s));
    this.v = parameterSizes.map((s) => new Float64Array(s));
  }

  step(params: Float64Array[], grads: Float64Array[]): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let p = 0; p < params.length; p++) {
      const w = params[p];
      const g = grads[p];
      const m = this.m[p];
      const v = this.v[p];
      for (let i = 0; i < w.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        w[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.epsilon);
      }
    }
  }
}
