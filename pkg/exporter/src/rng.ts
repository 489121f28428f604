/** Small deterministic PRNG (splitmix32) so every byte the exporter
 * writes is reproducible from a seed. Not cryptographic. */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (this.state + 0x9e3779b9) >>> 0;
    let z = this.state;
    z ^= z >>> 16;
    z = Math.imul(z, 0x21f0aaad);
    z ^= z >>> 15;
    z = Math.imul(z, 0x735a2d97);
    z ^= z >>> 15;
    return (z >>> 0) / 4294967296;
  }

  /** Uniform float in [lo, hi). */
  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next();
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Standard normal via Box-Muller (one value per call, no caching,
   * so the stream stays position-independent). */
  gauss(): number {
    let u = this.next();
    if (u === 0) u = 1e-12;
    const v = this.next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }

  /** Child generator with a decorrelated seed. */
  fork(tag: number): Rng {
    return new Rng((Math.imul(this.state ^ tag, 0x85ebca6b) ^ 0x1b873593) >>> 0);
  }
}
