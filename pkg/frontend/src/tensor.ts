/**
 * Minimal dense linear algebra on row-major Float64Arrays.
 *
 * Everything the trainer needs: batched matmuls in the three orientations
 * that backprop requires, plus a seeded RNG with gaussian sampling so runs
 * are reproducible.
 */

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float64Array(rows * cols) };
}

export function fromArray(rows: number, cols: number, values: ArrayLike<number>): Matrix {
  if (values.length !== rows * cols) {
    throw new Error(`expected ${rows * cols} values, got ${values.length}`);
  }
  return { rows, cols, data: Float64Array.from(values) };
}

export function copy(a: Matrix): Matrix {
  return { rows: a.rows, cols: a.cols, data: a.data.slice() };
}

/** C = A @ B, (n,k) x (k,m) -> (n,m); ikj loop order keeps access contiguous. */
export function matmul(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch: ${a.cols} vs ${b.rows}`);
  const c = out ?? zeros(a.rows, b.cols);
  c.data.fill(0);
  const { rows: n, cols: k } = a;
  const m = b.cols;
  for (let i = 0; i < n; i++) {
    const aRow = i * k;
    const cRow = i * m;
    for (let j = 0; j < k; j++) {
      const av = a.data[aRow + j];
      if (av === 0) continue;
      const bRow = j * m;
      for (let l = 0; l < m; l++) {
        c.data[cRow + l] += av * b.data[bRow + l];
      }
    }
  }
  return c;
}

/** C = A @ B^T, (n,k) x (m,k) -> (n,m); inner dot product unrolled by 4. */
export function matmulTransposeB(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.cols !== b.cols) throw new Error(`matmulTransposeB shape mismatch: ${a.cols} vs ${b.cols}`);
  const c = out ?? zeros(a.rows, b.rows);
  const { rows: n, cols: k } = a;
  const m = b.rows;
  const k4 = k - (k % 4);
  const ad = a.data;
  const bd = b.data;
  for (let i = 0; i < n; i++) {
    const aRow = i * k;
    const cRow = i * m;
    for (let l = 0; l < m; l++) {
      const bRow = l * k;
      let s0 = 0;
      let s1 = 0;
      let s2 = 0;
      let s3 = 0;
      let j = 0;
      for (; j < k4; j += 4) {
        s0 += ad[aRow + j] * bd[bRow + j];
        s1 += ad[aRow + j + 1] * bd[bRow + j + 1];
        s2 += ad[aRow + j + 2] * bd[bRow + j + 2];
        s3 += ad[aRow + j + 3] * bd[bRow + j + 3];
      }
      let s = s0 + s1 + s2 + s3;
      for (; j < k; j++) s += ad[aRow + j] * bd[bRow + j];
      c.data[cRow + l] = s;
    }
  }
  return c;
}

/** C = A^T @ B, (n,k) x (n,m) -> (k,m); used for weight gradients. */
export function matmulTransposeA(a: Matrix, b: Matrix, out?: Matrix): Matrix {
  if (a.rows !== b.rows) throw new Error(`matmulTransposeA shape mismatch: ${a.rows} vs ${b.rows}`);
  const c = out ?? zeros(a.cols, b.cols);
  c.data.fill(0);
  const n = a.rows;
  const k = a.cols;
  const m = b.cols;
  for (let i = 0; i < n; i++) {
    const aRow = i * k;
    const bRow = i * m;
    for (let j = 0; j < k; j++) {
      const av = a.data[aRow + j];
      if (av === 0) continue;
      const cRow = j * m;
      for (let l = 0; l < m; l++) {
        c.data[cRow + l] += av * b.data[bRow + l];
      }
    }
  }
  return c;
}

export function addRowVectorInPlace(a: Matrix, v: Float64Array): Matrix {
  if (v.length !== a.cols) throw new Error("row vector length mismatch");
  for (let i = 0; i < a.rows; i++) {
    const row = i * a.cols;
    for (let j = 0; j < a.cols; j++) a.data[row + j] += v[j];
  }
  return a;
}

export function reluInPlace(a: Matrix): Matrix {
  for (let i = 0; i < a.data.length; i++) if (a.data[i] < 0) a.data[i] = 0;
  return a;
}

/** dX = dY masked by (Y > 0); Y is the post-relu activation. */
export function reluBackwardInPlace(grad: Matrix, activated: Matrix): Matrix {
  for (let i = 0; i < grad.data.length; i++) {
    if (activated.data[i] <= 0) grad.data[i] = 0;
  }
  return grad;
}

/** Column sums, (n,m) -> length-m vector; bias gradients. */
export function columnSums(a: Matrix): Float64Array {
  const out = new Float64Array(a.cols);
  for (let i = 0; i < a.rows; i++) {
    const row = i * a.cols;
    for (let j = 0; j < a.cols; j++) out[j] += a.data[row + j];
  }
  return out;
}

export function sliceRows(a: Matrix, start: number, end: number): Matrix {
  return {
    rows: end - start,
    cols: a.cols,
    data: a.data.slice(start * a.cols, end * a.cols),
  };
}

/**
 * splitmix64-seeded xoshiro256++ generator with a Box-Muller gaussian;
 * deterministic across platforms (all math stays in float64).
 */
export class Rng {
  private s: BigUint64Array;
  private spareGaussian: number | null = null;

  constructor(seed: number) {
    this.s = new BigUint64Array(4);
    let x = BigInt.asUintN(64, BigInt(Math.floor(seed)) + 0x9e3779b97f4a7c15n);
    for (let i = 0; i < 4; i++) {
      x = BigInt.asUintN(64, x + 0x9e3779b97f4a7c15n);
      let z = x;
      z = BigInt.asUintN(64, (z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n);
      z = BigInt.asUintN(64, (z ^ (z >> 27n)) * 0x94d049bb133111ebn);
      this.s[i] = z ^ (z >> 31n);
    }
  }

  private nextUint64(): bigint {
    const s = this.s;
    const rotl = (v: bigint, k: bigint) =>
      BigInt.asUintN(64, (v << k) | (v >> (64n - k)));
    const result = BigInt.asUintN(64, rotl(BigInt.asUintN(64, s[0] + s[3]), 23n) + s[0]);
    const t = BigInt.asUintN(64, s[1] << 17n);
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45n);
    return result;
  }

  /** Uniform in [0, 1) with 53 random bits. */
  uniform(): number {
    return Number(this.nextUint64() >> 11n) / 9007199254740992;
  }

  gaussian(): number {
    if (this.spareGaussian !== null) {
      const v = this.spareGaussian;
      this.spareGaussian = null;
      return v;
    }
    let u1 = this.uniform();
    while (u1 === 0) u1 = this.uniform();
    const u2 = this.uniform();
    const r = Math.sqrt(-2 * Math.log(u1));
    this.spareGaussian = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  }

  /** Fisher-Yates shuffle of 0..n-1. */
  permutation(n: number): Uint32Array {
    const idx = new Uint32Array(n);
    for (let i = 0; i < n; i++) idx[i] = i;
    for (let i = n - 1; i > 0; i--) {
      const j = Math.floor(this.uniform() * (i + 1));
      const t = idx[i];
      idx[i] = idx[j];
      idx[j] = t;
    }
    return idx;
  }
}
