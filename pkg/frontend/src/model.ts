/**
 * A compact token classifier trained in-ecosystem: token + positional
 * embeddings, one self-attention layer with pad keys masked, a ReLU
 * feed-forward, both with residual connections, and a linear head with
 * a per-token softmax.  Forward and backward are hand-written over
 * Float64Array matrices; with a fixed seed everything is reproducible.
 */

import { makeGaussian, makeRng } from "./rng.js";

export interface ModelDims {
  vocabSize: number;
  maxLen: number;
  hidden: number;
  ffn: number;
  numClasses: number;
}

export class Mat {
  data: Float64Array;
  constructor(
    public rows: number,
    public cols: number,
    data?: Float64Array,
  ) {
    this.data = data ?? new Float64Array(rows * cols);
  }
  get(i: number, j: number): number {
    return this.data[i * this.cols + j];
  }
  set(i: number, j: number, v: number): void {
    this.data[i * this.cols + j] = v;
  }
  fill(v: number): void {
    this.data.fill(v);
  }
  clone(): Mat {
    return new Mat(this.rows, this.cols, Float64Array.from(this.data));
  }
}

/** C = A @ B */
function mm(a: Mat, b: Mat): Mat {
  const out = new Mat(a.rows, b.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let k = 0; k < a.cols; k++) {
      const aik = a.data[i * a.cols + k];
      if (aik === 0) continue;
      for (let j = 0; j < b.cols; j++) {
        out.data[i * out.cols + j] += aik * b.data[k * b.cols + j];
      }
    }
  }
  return out;
}

/** C = A^T @ B */
function mmTA(a: Mat, b: Mat): Mat {
  const out = new Mat(a.cols, b.cols);
  for (let k = 0; k < a.rows; k++) {
    for (let i = 0; i < a.cols; i++) {
      const aki = a.data[k * a.cols + i];
      if (aki === 0) continue;
      for (let j = 0; j < b.cols; j++) {
        out.data[i * out.cols + j] += aki * b.data[k * b.cols + j];
      }
    }
  }
  return out;
}

/** C = A @ B^T */
function mmTB(a: Mat, b: Mat): Mat {
  const out = new Mat(a.rows, b.rows);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < b.rows; j++) {
      let acc = 0;
      for (let k = 0; k < a.cols; k++) {
        acc += a.data[i * a.cols + k] * b.data[j * b.cols + k];
      }
      out.data[i * out.cols + j] = acc;
    }
  }
  return out;
}

function addInPlace(target: Mat, other: Mat, scale = 1): void {
  for (let i = 0; i < target.data.length; i++) target.data[i] += scale * other.data[i];
}

function addRowVector(target: Mat, vec: Float64Array): void {
  for (let i = 0; i < target.rows; i++) {
    for (let j = 0; j < target.cols; j++) target.data[i * target.cols + j] += vec[j];
  }
}

function softmaxRows(m: Mat): Mat {
  const out = new Mat(m.rows, m.cols);
  for (let i = 0; i < m.rows; i++) {
    let max = -Infinity;
    for (let j = 0; j < m.cols; j++) max = Math.max(max, m.get(i, j));
    let sum = 0;
    for (let j = 0; j < m.cols; j++) {
      const e = Math.exp(m.get(i, j) - max);
      out.set(i, j, e);
      sum += e;
    }
    for (let j = 0; j < m.cols; j++) out.set(i, j, out.get(i, j) / sum);
  }
  return out;
}

const PARAM_SHAPES = (d: ModelDims): Array<[string, number, number]> => [
  ["emb", d.vocabSize, d.hidden],
  ["pos", d.maxLen, d.hidden],
  ["wq", d.hidden, d.hidden],
  ["wk", d.hidden, d.hidden],
  ["wv", d.hidden, d.hidden],
  ["wo", d.hidden, d.hidden],
  ["bq", 1, d.hidden],
  ["bk", 1, d.hidden],
  ["bv", 1, d.hidden],
  ["bo", 1, d.hidden],
  ["w1", d.hidden, d.ffn],
  ["b1", 1, d.ffn],
  ["w2", d.ffn, d.hidden],
  ["b2", 1, d.hidden],
  ["wh", d.hidden, d.numClasses],
  ["bh", 1, d.numClasses],
];

const NEG_INF = -1e9;
const LOG_CLAMP = 1e-12;

export class TokenClassifierModel {
  params = new Map<string, Mat>();
  grads = new Map<string, Mat>();

  constructor(
    public dims: ModelDims,
    seed: number,
  ) {
    const gauss = makeGaussian(makeRng(seed));
    for (const [name, rows, cols] of PARAM_SHAPES(dims)) {
      const mat = new Mat(rows, cols);
      if (!name.startsWith("b")) {
        for (let i = 0; i < mat.data.length; i++) mat.data[i] = 0.02 * gauss();
      }
      this.params.set(name, mat);
      this.grads.set(name, new Mat(rows, cols));
    }
  }

  private p(name: string): Mat {
    return this.params.get(name)!;
  }
  private g(name: string): Mat {
    return this.grads.get(name)!;
  }

  zeroGrads(): void {
    for (const mat of this.grads.values()) mat.fill(0);
  }

  private encodeForward(ids: number[], mask: boolean[]) {
    const { maxLen, hidden } = this.dims;
    const scale = Math.sqrt(hidden);
    const x = new Mat(maxLen, hidden);
    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < hidden; j++) {
        x.set(t, j, this.p("emb").get(ids[t], j) + this.p("pos").get(t, j));
      }
    }
    const q = mm(x, this.p("wq"));
    addRowVector(q, this.p("bq").data);
    const k = mm(x, this.p("wk"));
    addRowVector(k, this.p("bk").data);
    const v = mm(x, this.p("wv"));
    addRowVector(v, this.p("bv").data);
    const scores = mmTB(q, k);
    for (let i = 0; i < maxLen; i++) {
      for (let j = 0; j < maxLen; j++) {
        scores.set(i, j, scores.get(i, j) / scale + (mask[j] ? 0 : NEG_INF));
      }
    }
    const attn = softmaxRows(scores);
    const ctx = mm(attn, v);
    const attnOut = mm(ctx, this.p("wo"));
    addRowVector(attnOut, this.p("bo").data);
    const x1 = x.clone();
    addInPlace(x1, attnOut);

    const hPre = mm(x1, this.p("w1"));
    addRowVector(hPre, this.p("b1").data);
    const h = hPre.clone();
    for (let i = 0; i < h.data.length; i++) h.data[i] = Math.max(h.data[i], 0);
    const ffnOut = mm(h, this.p("w2"));
    addRowVector(ffnOut, this.p("b2").data);
    const x2 = x1.clone();
    addInPlace(x2, ffnOut);

    const logits = mm(x2, this.p("wh"));
    addRowVector(logits, this.p("bh").data);
    const probs = softmaxRows(logits);
    return { x, q, k, v, attn, ctx, x1, hPre, h, x2, probs };
  }

  /** Per-token class probabilities in evaluation mode. */
  forward(ids: number[], mask: boolean[]): number[][] {
    const { probs } = this.encodeForward(ids, mask);
    const out: number[][] = [];
    for (let t = 0; t < probs.rows; t++) {
      out.push(Array.from(probs.data.subarray(t * probs.cols, (t + 1) * probs.cols)));
    }
    return out;
  }

  /**
   * Forward plus gradient accumulation for one instance.  The caller
   * passes the bat­ch-level weight normalizer so batch gradients sum to
   * the gradient of the batch-mean loss.  Returns the unnormalized
   * weighted loss sum of this instance.
   */
  forwardBackward(
    ids: number[],
    mask: boolean[],
    labelIdx: number[],
    weights: number[],
    invDenom: number,
  ): number {
    const cache = this.encodeForward(ids, mask);
    const { maxLen, hidden } = this.dims;
    const scale = Math.sqrt(hidden);
    const probs = cache.probs;

    let lossSum = 0;
    const dLogits = new Mat(maxLen, this.dims.numClasses);
    for (let t = 0; t < maxLen; t++) {
      const w = mask[t] ? weights[labelIdx[t]] : 0;
      if (w <= 0) continue; // skipped outright, never multiplied by zero
      const pGold = probs.get(t, labelIdx[t]);
      lossSum += w * -Math.log(Math.max(pGold, LOG_CLAMP));
      for (let c = 0; c < this.dims.numClasses; c++) {
        const grad = probs.get(t, c) - (c === labelIdx[t] ? 1 : 0);
        dLogits.set(t, c, w * invDenom * grad);
      }
    }

    // head
    addInPlace(this.g("wh"), mmTA(cache.x2, dLogits));
    for (let t = 0; t < maxLen; t++) {
      for (let c = 0; c < this.dims.numClasses; c++) {
        this.g("bh").data[c] += dLogits.get(t, c);
      }
    }
    const dX2 = mmTB(dLogits, this.p("wh"));

    // ffn (residual: dX1 gets dX2 plus the ffn path)
    const dH = mmTB(dX2, this.p("w2"));
    for (let i = 0; i < dH.data.length; i++) {
      if (cache.hPre.data[i] <= 0) dH.data[i] = 0;
    }
    addInPlace(this.g("w2"), mmTA(cache.h, dX2));
    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < hidden; j++) this.g("b2").data[j] += dX2.get(t, j);
    }
    addInPlace(this.g("w1"), mmTA(cache.x1, dH));
    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < this.dims.ffn; j++) this.g("b1").data[j] += dH.get(t, j);
    }
    const dX1 = dX2.clone();
    addInPlace(dX1, mmTB(dH, this.p("w1")));

    // attention (residual: dX gets dX1 plus the attention path)
    const dCtx = mmTB(dX1, this.p("wo"));
    addInPlace(this.g("wo"), mmTA(cache.ctx, dX1));
    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < hidden; j++) this.g("bo").data[j] += dX1.get(t, j);
    }
    const dAttn = mmTB(dCtx, cache.v);
    const dV = mmTA(cache.attn, dCtx);
    const dScores = new Mat(maxLen, maxLen);
    for (let i = 0; i < maxLen; i++) {
      let dot = 0;
      for (let j = 0; j < maxLen; j++) dot += dAttn.get(i, j) * cache.attn.get(i, j);
      for (let j = 0; j < maxLen; j++) {
        dScores.set(i, j, (cache.attn.get(i, j) * (dAttn.get(i, j) - dot)) / scale);
      }
    }
    const dQ = mm(dScores, cache.k);
    const dK = mmTA(dScores, cache.q);

    addInPlace(this.g("wq"), mmTA(cache.x, dQ));
    addInPlace(this.g("wk"), mmTA(cache.x, dK));
    addInPlace(this.g("wv"), mmTA(cache.x, dV));
    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < hidden; j++) {
        this.g("bq").data[j] += dQ.get(t, j);
        this.g("bk").data[j] += dK.get(t, j);
        this.g("bv").data[j] += dV.get(t, j);
      }
    }
    const dX = dX1.clone();
    addInPlace(dX, mmTB(dQ, this.p("wq")));
    addInPlace(dX, mmTB(dK, this.p("wk")));
    addInPlace(dX, mmTB(dV, this.p("wv")));

    for (let t = 0; t < maxLen; t++) {
      for (let j = 0; j < hidden; j++) {
        const g = dX.get(t, j);
        this.g("emb").data[ids[t] * hidden + j] += g;
        this.g("pos").data[t * hidden + j] += g;
      }
    }
    return lossSum;
  }

  toJSON(): object {
    const weights: Record<string, number[]> = {};
    for (const [name, mat] of this.params) weights[name] = Array.from(mat.data);
    return { format: "scopeworks-adapter-weights", version: 1, dims: this.dims, weights };
  }

  static fromJSON(obj: {
    format?: string;
    version?: number;
    dims: ModelDims;
    weights: Record<string, number[]>;
  }): TokenClassifierModel {
    if (obj.format !== "scopeworks-adapter-weights" || obj.version !== 1) {
      throw new Error(`not a version-1 adapter weights file (format '${obj.format}')`);
    }
    const model = new TokenClassifierModel(obj.dims, 0);
    for (const [name, mat] of model.params) {
      const stored = obj.weights[name];
      if (!stored || stored.length !== mat.data.length) {
        throw new Error(`weights file is missing or misshaped for parameter '${name}'`);
      }
      mat.data.set(stored);
    }
    return model;
  }
}

export class Adam {
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private t = 0;

  constructor(
    private model: TokenClassifierModel,
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    for (const [name, mat] of model.params) {
      this.m.set(name, new Float64Array(mat.data.length));
      this.v.set(name, new Float64Array(mat.data.length));
    }
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const [name, mat] of this.model.params) {
      const g = this.model.grads.get(name)!.data;
      const m = this.m.get(name)!;
      const v = this.v.get(name)!;
      for (let i = 0; i < mat.data.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        mat.data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}
