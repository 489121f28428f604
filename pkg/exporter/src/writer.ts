/** Feature-bundle writer. A bundle directory is the interchange unit
 * between feature producers and the adaptation engine:
 *
 *   manifest.json  shapes, names, flags, checksums (sorted keys)
 *   tensors.bin    fixed tensors, concatenated raw float32 LE
 *   samples.bin    framed per-sample records (id, label, views)
 *   mask.bin       optional per-view ground-truth flags
 *
 * All floats little-endian IEEE-754 float32, row-major. Every payload
 * is pinned by a sha256 in the manifest, and the manifest's own digest
 * is the bundle's identity.
 */

import { createHash } from 'node:crypto';
import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

export const FORMAT_VERSION = 1;
export const DTYPE = 'float32-le';

export interface Tensor {
  name: string;
  shape: number[];
  /** row-major values, length must equal product(shape) */
  data: Float64Array;
}

export interface Sample {
  sampleId: number;
  /** -1 = unlabeled */
  label: number;
  /** (viewCount, dim) row-major */
  views: Float64Array;
  viewCount: number;
  /** optional per-view informative flags, length viewCount */
  mask?: Uint8Array;
}

export interface BundleSpec {
  dim: number;
  classNames: string[];
  numDescriptions: number;
  viewsPerSample: number;
  originalIndex: number;
  /** set true only if every row is unit-norm after the float32 cast */
  normalized: boolean;
  variableViews: boolean;
  tensors: Tensor[];
  samples: Sample[];
}

export function sha256hex(buf: Buffer): string {
  return createHash('sha256').update(buf).digest('hex');
}

/** Encode float64 values as float32 little-endian bytes. */
export function f32leBytes(values: Float64Array): Buffer {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i]!, i * 4);
  }
  return buf;
}

/** JSON with recursively sorted keys, two-space indent, and a trailing
 * newline — identical logical content must yield identical bytes. */
export function canonicalJson(value: unknown): string {
  return JSON.stringify(sortKeysDeep(value), null, 2) + '\n';
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === 'object') {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value).sort()) {
      out[key] = sortKeysDeep((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

export function encodeSampleRecord(sample: Sample, dim: number): Buffer {
  const header = Buffer.alloc(16);
  header.writeBigUInt64LE(BigInt(sample.sampleId), 0);
  header.writeInt32LE(sample.label, 8);
  header.writeUInt32LE(sample.viewCount, 12);
  if (sample.views.length !== sample.viewCount * dim) {
    throw new RangeError(
      `sample ${sample.sampleId}: ${sample.views.length} values != ` +
        `${sample.viewCount} views x ${dim}`,
    );
  }
  return Buffer.concat([header, f32leBytes(sample.views)]);
}

function encodeMaskRecord(sample: Sample): Buffer {
  const header = Buffer.alloc(4);
  header.writeUInt32LE(sample.viewCount, 0);
  const flags = Buffer.from(sample.mask!);
  return Buffer.concat([header, flags]);
}

function validateSpec(spec: BundleSpec): void {
  if (spec.classNames.length < 2) {
    throw new RangeError(`need at least 2 classes, got ${spec.classNames.length}`);
  }
  if (spec.originalIndex < 0 || spec.originalIndex >= spec.viewsPerSample) {
    throw new RangeError(
      `original_index ${spec.originalIndex} outside [0, ${spec.viewsPerSample})`,
    );
  }
  const c = spec.classNames.length;
  for (const t of spec.tensors) {
    const expected = t.shape.reduce((a, b) => a * b, 1);
    if (t.data.length !== expected) {
      throw new RangeError(`tensor ${t.name}: ${t.data.length} values != shape ${t.shape}`);
    }
  }
  const byName = new Map(spec.tensors.map(t => [t.name, t]));
  const desc = byName.get('descriptions');
  const base = byName.get('base_class_embeddings');
  if (!desc || !base) {
    throw new RangeError('tensors must include descriptions and base_class_embeddings');
  }
  assertShape('descriptions', desc.shape, [c, spec.numDescriptions, spec.dim]);
  assertShape('base_class_embeddings', base.shape, [c, spec.dim]);
  const masked = spec.samples.filter(s => s.mask);
  if (masked.length !== 0 && masked.length !== spec.samples.length) {
    throw new RangeError('either every sample has a mask or none does');
  }
  for (const s of spec.samples) {
    if (s.label < -1 || s.label >= c) {
      throw new RangeError(`sample ${s.sampleId}: label ${s.label} outside [-1, ${c})`);
    }
    if (!spec.variableViews && s.viewCount !== spec.viewsPerSample) {
      throw new RangeError(
        `sample ${s.sampleId}: ${s.viewCount} views != ${spec.viewsPerSample}`,
      );
    }
    if (s.mask && s.mask.length !== s.viewCount) {
      throw new RangeError(`sample ${s.sampleId}: mask length != view count`);
    }
  }
}

/** Write the four bundle files into `dir` (created if needed).
 * Returns the bundle identity: sha256 of the manifest bytes. */
export function writeBundle(dir: string, spec: BundleSpec): string {
  validateSpec(spec);
  mkdirSync(dir, { recursive: true });

  const tensorEntries = [];
  const tensorChunks = [];
  let offset = 0;
  for (const t of spec.tensors) {
    const bytes = f32leBytes(t.data);
    tensorChunks.push(bytes);
    tensorEntries.push({
      name: t.name,
      shape: t.shape,
      file: 'tensors.bin',
      byte_offset: offset,
      byte_length: bytes.length,
      checksum: sha256hex(bytes),
    });
    offset += bytes.length;
  }
  writeFileSync(join(dir, 'tensors.bin'), Buffer.concat(tensorChunks));

  const sampleBlob = Buffer.concat(
    spec.samples.map(s => encodeSampleRecord(s, spec.dim)),
  );
  writeFileSync(join(dir, 'samples.bin'), sampleBlob);

  const withMask = spec.samples.length > 0 && spec.samples[0]!.mask !== undefined;
  let maskEntry: { file: string; checksum: string } | undefined;
  if (withMask) {
    const maskBlob = Buffer.concat(spec.samples.map(encodeMaskRecord));
    writeFileSync(join(dir, 'mask.bin'), maskBlob);
    maskEntry = { file: 'mask.bin', checksum: sha256hex(maskBlob) };
  }

  const manifest: Record<string, unknown> = {
    format_version: FORMAT_VERSION,
    dtype: DTYPE,
    dim: spec.dim,
    num_classes: spec.classNames.length,
    num_descriptions: spec.numDescriptions,
    views_per_sample: spec.viewsPerSample,
    num_samples: spec.samples.length,
    class_names: spec.classNames,
    normalized: spec.normalized,
    variable_views: spec.variableViews,
    original_index: spec.originalIndex,
    tensors: tensorEntries,
    samples: { file: 'samples.bin', checksum: sha256hex(sampleBlob) },
  };
  if (maskEntry) manifest['mask'] = maskEntry;

  const manifestBytes = Buffer.from(canonicalJson(manifest), 'utf8');
  writeFileSync(join(dir, 'manifest.json'), manifestBytes);
  return sha256hex(manifestBytes);
}

function assertShape(name: string, actual: number[], expected: number[]): void {
  if (actual.length !== expected.length || actual.some((v, i) => v !== expected[i])) {
    throw new RangeError(`tensor ${name}: shape [${actual}] != expected [${expected}]`);
  }
}
