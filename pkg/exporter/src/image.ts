/** Procedural test images. Each "photo" is a patterned color field —
 * enough structure for a statistics-based encoder to tell materials
 * apart, and fully reproducible from a seed. */

import { Rng } from './rng.js';

export type Pattern = 'stripes' | 'checker' | 'spots';

export interface MaterialSpec {
  name: string;
  base: [number, number, number];
  accent: [number, number, number];
  pattern: Pattern;
  /** pattern period in pixels */
  scale: number;
}

/** Interleaved RGB, values in [0, 1]. */
export interface Image {
  width: number;
  height: number;
  data: Float64Array;
}

function patternMask(
  pattern: Pattern,
  x: number,
  y: number,
  scale: number,
  phase: number,
): number {
  switch (pattern) {
    case 'stripes':
      return (Math.sin((2 * Math.PI * (x + phase)) / scale) + 1) / 2;
    case 'checker': {
      const cx = Math.floor((x + phase) / scale) % 2;
      const cy = Math.floor((y + phase) / scale) % 2;
      return cx === cy ? 1 : 0;
    }
    case 'spots': {
      const dx = ((x + phase) % scale) - scale / 2;
      const dy = ((y + phase * 0.7) % scale) - scale / 2;
      return dx * dx + dy * dy < (scale * scale) / 9 ? 1 : 0;
    }
  }
}

/** Render one material sample: base color field, accent pattern,
 * a soft lighting gradient, and pixel noise. */
export function renderScene(
  spec: MaterialSpec,
  rng: Rng,
  width = 64,
  height = 64,
  noise = 0.04,
): Image {
  const data = new Float64Array(width * height * 3);
  const phase = rng.uniform(0, spec.scale);
  const lightAngle = rng.uniform(0, 2 * Math.PI);
  const lx = Math.cos(lightAngle);
  const ly = Math.sin(lightAngle);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const m = patternMask(spec.pattern, x, y, spec.scale, phase);
      const light = 1 + 0.15 * ((lx * x) / width + (ly * y) / height - 0.5);
      const o = (y * width + x) * 3;
      for (let c = 0; c < 3; c++) {
        const v =
          (spec.base[c]! * (1 - m) + spec.accent[c]! * m) * light +
          noise * rng.gauss();
        data[o + c] = Math.min(1, Math.max(0, v));
      }
    }
  }
  return { width, height, data };
}

export function crop(img: Image, x0: number, y0: number, w: number, h: number): Image {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height) {
    throw new RangeError(
      `crop ${w}x${h}@(${x0},${y0}) exceeds image ${img.width}x${img.height}`,
    );
  }
  const data = new Float64Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    const src = ((y0 + y) * img.width + x0) * 3;
    data.set(img.data.subarray(src, src + w * 3), y * w * 3);
  }
  return { width: w, height: h, data };
}

/** Random square crop covering between half and all of the short side. */
export function randomCrop(img: Image, rng: Rng): Image {
  const short = Math.min(img.width, img.height);
  const size = Math.max(8, Math.floor(short * rng.uniform(0.5, 1.0)));
  const x0 = rng.int(img.width - size + 1);
  const y0 = rng.int(img.height - size + 1);
  return crop(img, x0, y0, size, size);
}
