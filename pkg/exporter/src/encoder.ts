/** A toy image encoder: hand-rolled color/texture statistics pushed
 * through a fixed random projection into the embedding space. Stands
 * in for a real vision tower so bundles can be produced hermetically;
 * the engine downstream neither knows nor cares. */

import { Image } from './image.js';
import { Rng } from './rng.js';

const HIST_BINS = 4;
/** 12 histogram bins + 3 means + 3 stds + 2 gradient energies. */
export const RAW_FEATURES = 3 * HIST_BINS + 3 + 3 + 2;

/** Raw statistics vector for one image: per-channel histograms and
 * moments plus horizontal/vertical gradient energy. Scale-free, so
 * crops of the same material land near the full picture. */
export function imageStats(img: Image): Float64Array {
  const { width, height, data } = img;
  const n = width * height;
  const out = new Float64Array(RAW_FEATURES);
  const mean = [0, 0, 0];
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < 3; c++) {
      const v = data[i * 3 + c]!;
      const bin = Math.min(HIST_BINS - 1, Math.floor(v * HIST_BINS));
      out[c * HIST_BINS + bin]!++;
      mean[c]! += v;
    }
  }
  for (let c = 0; c < 3; c++) {
    for (let b = 0; b < HIST_BINS; b++) out[c * HIST_BINS + b]! /= n;
    mean[c]! /= n;
    out[3 * HIST_BINS + c] = mean[c]!;
  }
  const varSum = [0, 0, 0];
  for (let i = 0; i < n; i++) {
    for (let c = 0; c < 3; c++) {
      const d = data[i * 3 + c]! - mean[c]!;
      varSum[c]! += d * d;
    }
  }
  for (let c = 0; c < 3; c++) {
    out[3 * HIST_BINS + 3 + c] = Math.sqrt(varSum[c]! / n);
  }
  // luminance gradient energy, horizontal then vertical
  let gh = 0;
  let gv = 0;
  const lum = (i: number) =>
    0.299 * data[i * 3]! + 0.587 * data[i * 3 + 1]! + 0.114 * data[i * 3 + 2]!;
  for (let y = 0; y < height; y++) {
    for (let x = 1; x < width; x++) {
      const d = lum(y * width + x) - lum(y * width + x - 1);
      gh += d * d;
    }
  }
  for (let y = 1; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const d = lum(y * width + x) - lum((y - 1) * width + x);
      gv += d * d;
    }
  }
  out[RAW_FEATURES - 2] = Math.sqrt(gh / n);
  out[RAW_FEATURES - 1] = Math.sqrt(gv / n);
  return out;
}

export class ToyEncoder {
  readonly dim: number;
  private readonly projection: Float64Array; // (dim, RAW_FEATURES) row-major

  constructor(dim: number, seed: number) {
    if (dim < 2) throw new RangeError(`embedding dim must be >= 2, got ${dim}`);
    this.dim = dim;
    const rng = new Rng(seed);
    this.projection = new Float64Array(dim * RAW_FEATURES);
    for (let i = 0; i < this.projection.length; i++) {
      this.projection[i] = rng.gauss() / Math.sqrt(RAW_FEATURES);
    }
  }

  /** Unit-norm float64 embedding. The histogram block always carries
   * mass, so the projection input is never the zero vector. */
  embed(img: Image): Float64Array {
    const stats = imageStats(img);
    const out = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      let acc = 0;
      const row = i * RAW_FEATURES;
      for (let j = 0; j < RAW_FEATURES; j++) {
        acc += this.projection[row + j]! * stats[j]!;
      }
      out[i] = Math.tanh(acc);
    }
    return normalize(out);
  }
}

export function normalize(v: Float64Array): Float64Array {
  let sq = 0;
  for (const x of v) sq += x * x;
  const norm = Math.sqrt(sq);
  if (norm < 1e-12) throw new RangeError('cannot normalize a zero vector');
  const out = new Float64Array(v.length);
  for (let i = 0; i < v.length; i++) out[i] = v[i]! / norm;
  return out;
}

export function meanOf(vectors: Float64Array[]): Float64Array {
  if (vectors.length === 0) throw new RangeError('mean of zero vectors');
  const out = new Float64Array(vectors[0]!.length);
  for (const v of vectors) {
    for (let i = 0; i < out.length; i++) out[i]! += v[i]!;
  }
  for (let i = 0; i < out.length; i++) out[i]! /= vectors.length;
  return out;
}
