/** Hermetic demo export: three procedural materials stand in for an
 * image dataset, the toy encoder stands in for the vision/text towers,
 * and the result is a complete, checksummed feature bundle the
 * adaptation engine can run as-is.
 *
 * The "text" side is rendered, not worded: a description embedding is
 * the encoding of a canonical exemplar image of the material, so both
 * modalities genuinely live in one space. */

import { MaterialSpec, randomCrop, renderScene } from './image.js';
import { ToyEncoder, meanOf, normalize } from './encoder.js';
import { BundleSpec, Sample, Tensor, writeBundle } from './writer.js';
import { Rng } from './rng.js';

export const MATERIALS: MaterialSpec[] = [
  {
    name: 'brick',
    base: [0.62, 0.26, 0.18],
    accent: [0.82, 0.74, 0.66],
    pattern: 'stripes',
    scale: 12,
  },
  {
    name: 'moss',
    base: [0.18, 0.42, 0.16],
    accent: [0.55, 0.72, 0.3],
    pattern: 'spots',
    scale: 10,
  },
  {
    name: 'denim',
    base: [0.16, 0.25, 0.52],
    accent: [0.68, 0.74, 0.86],
    pattern: 'checker',
    scale: 8,
  },
];

export interface DemoOptions {
  dim?: number;
  samplesPerClass?: number;
  viewsPerSample?: number;
  imageSize?: number;
  seed?: number;
}

export interface DemoReport {
  dir: string;
  identity: string;
  numClasses: number;
  numSamples: number;
  dim: number;
  viewsPerSample: number;
}

const DESCRIPTIONS_PER_CLASS = 2;

/** Build the demo bundle and write it under `dir`. */
export function exportDemo(dir: string, opts: DemoOptions = {}): DemoReport {
  const dim = opts.dim ?? 32;
  const samplesPerClass = opts.samplesPerClass ?? 2;
  const viewsPerSample = opts.viewsPerSample ?? 8;
  const imageSize = opts.imageSize ?? 64;
  const seed = opts.seed ?? 1;

  const root = new Rng(seed);
  const encoder = new ToyEncoder(dim, root.fork(0xe).next() * 2 ** 32);

  // Descriptions: canonical renders of each material under fixed
  // per-variant conditions; class embeddings are their unit mean.
  const descriptions = new Float64Array(
    MATERIALS.length * DESCRIPTIONS_PER_CLASS * dim,
  );
  const baseRows: Float64Array[] = [];
  MATERIALS.forEach((mat, c) => {
    const variants: Float64Array[] = [];
    for (let v = 0; v < DESCRIPTIONS_PER_CLASS; v++) {
      const calm = root.fork(c * 31 + v + 1);
      const exemplar = renderScene(mat, calm, imageSize, imageSize, 0.01);
      const emb = encoder.embed(exemplar);
      variants.push(emb);
      descriptions.set(emb, (c * DESCRIPTIONS_PER_CLASS + v) * dim);
    }
    baseRows.push(normalize(meanOf(variants)));
  });
  const base = new Float64Array(MATERIALS.length * dim);
  baseRows.forEach((row, c) => base.set(row, c * dim));

  // Samples: fresh scenes, view 0 the full frame, the rest random
  // square crops — the usual augmentation stack, minus the dataset.
  const samples: Sample[] = [];
  let sampleId = 0;
  MATERIALS.forEach((mat, c) => {
    for (let s = 0; s < samplesPerClass; s++) {
      const sceneRng = root.fork(0x515 + sampleId);
      const scene = renderScene(mat, sceneRng, imageSize, imageSize);
      const views = new Float64Array(viewsPerSample * dim);
      views.set(encoder.embed(scene), 0);
      for (let v = 1; v < viewsPerSample; v++) {
        views.set(encoder.embed(randomCrop(scene, sceneRng)), v * dim);
      }
      samples.push({
        sampleId,
        label: c,
        views,
        viewCount: viewsPerSample,
      });
      sampleId++;
    }
  });

  const tensors: Tensor[] = [
    {
      name: 'descriptions',
      shape: [MATERIALS.length, DESCRIPTIONS_PER_CLASS, dim],
      data: descriptions,
    },
    {
      name: 'base_class_embeddings',
      shape: [MATERIALS.length, dim],
      data: base,
    },
  ];
  const spec: BundleSpec = {
    dim,
    classNames: MATERIALS.map(m => m.name),
    numDescriptions: DESCRIPTIONS_PER_CLASS,
    viewsPerSample,
    originalIndex: 0,
    // rows are normalized in float64 right before the float32 cast,
    // which keeps norms within ~1e-7 of 1 — inside the engine's gate
    normalized: true,
    variableViews: false,
    tensors,
    samples,
  };
  const identity = writeBundle(dir, spec);
  return {
    dir,
    identity,
    numClasses: MATERIALS.length,
    numSamples: samples.length,
    dim,
    viewsPerSample,
  };
}
