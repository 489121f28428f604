/** Verifying bundle reader. Mirrors the engine-side loader: nothing is
 * returned until the version, dtype, every declared shape, every
 * checksum, and the record framing have all been checked. */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { z } from 'zod';

import { DTYPE, FORMAT_VERSION, sha256hex } from './writer.js';

const tensorEntrySchema = z.object({
  name: z.string(),
  shape: z.array(z.int().positive()),
  file: z.string(),
  byte_offset: z.int().nonnegative(),
  byte_length: z.int().positive(),
  checksum: z.string().regex(/^[0-9a-f]{64}$/),
});

const fileRefSchema = z.object({
  file: z.string(),
  checksum: z.string().regex(/^[0-9a-f]{64}$/),
});

export const manifestSchema = z.object({
  format_version: z.int(),
  dtype: z.string(),
  dim: z.int().positive(),
  num_classes: z.int().min(2),
  num_descriptions: z.int().positive(),
  views_per_sample: z.int().positive(),
  num_samples: z.int().nonnegative(),
  class_names: z.array(z.string()),
  normalized: z.boolean(),
  variable_views: z.boolean(),
  original_index: z.int().nonnegative(),
  tensors: z.array(tensorEntrySchema),
  samples: fileRefSchema,
  mask: fileRefSchema.optional(),
});

export type Manifest = z.infer<typeof manifestSchema>;

export interface ReadTensor {
  name: string;
  shape: number[];
  data: Float64Array;
}

export interface ReadSample {
  sampleId: number;
  label: number;
  viewCount: number;
  /** (viewCount, dim) row-major float64 */
  views: Float64Array;
  mask?: Uint8Array;
}

export interface ReadBundle {
  manifest: Manifest;
  identity: string;
  tensors: Map<string, ReadTensor>;
  samples: ReadSample[];
}

export class BundleFormatError extends Error {}

function fail(msg: string): never {
  throw new BundleFormatError(msg);
}

function f64FromF32le(buf: Buffer): Float64Array {
  const out = new Float64Array(buf.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = buf.readFloatLE(i * 4);
  return out;
}

export function readBundle(dir: string): ReadBundle {
  const manifestBytes = readFileSync(join(dir, 'manifest.json'));
  const parsed = manifestSchema.safeParse(JSON.parse(manifestBytes.toString('utf8')));
  if (!parsed.success) fail(`manifest.json: ${parsed.error.issues[0]?.message}`);
  const m = parsed.data;

  if (m.format_version !== FORMAT_VERSION) {
    fail(`unsupported format_version ${m.format_version}`);
  }
  if (m.dtype !== DTYPE) fail(`unsupported dtype ${m.dtype}`);
  if (m.class_names.length !== m.num_classes) {
    fail(`${m.class_names.length} class names != num_classes ${m.num_classes}`);
  }
  if (m.original_index >= m.views_per_sample) {
    fail(`original_index ${m.original_index} outside [0, ${m.views_per_sample})`);
  }

  const tensorBlob = readFileSync(join(dir, 'tensors.bin'));
  const tensors = new Map<string, ReadTensor>();
  for (const entry of m.tensors) {
    const expected = 4 * entry.shape.reduce((a, b) => a * b, 1);
    if (entry.byte_length !== expected) {
      fail(`tensor ${entry.name}: byte_length ${entry.byte_length} != ${expected}`);
    }
    const end = entry.byte_offset + entry.byte_length;
    if (end > tensorBlob.length) {
      fail(`tensor ${entry.name}: range ends at ${end} > file size ${tensorBlob.length}`);
    }
    const bytes = tensorBlob.subarray(entry.byte_offset, end);
    if (sha256hex(bytes) !== entry.checksum) {
      fail(`tensor ${entry.name}: checksum mismatch`);
    }
    tensors.set(entry.name, {
      name: entry.name,
      shape: entry.shape,
      data: f64FromF32le(bytes),
    });
  }
  for (const required of ['descriptions', 'base_class_embeddings']) {
    if (!tensors.has(required)) fail(`missing required tensor ${required}`);
  }
  const desc = tensors.get('descriptions')!;
  assertShape(desc, [m.num_classes, m.num_descriptions, m.dim]);
  assertShape(tensors.get('base_class_embeddings')!, [m.num_classes, m.dim]);

  const sampleBlob = readFileSync(join(dir, 'samples.bin'));
  if (sha256hex(sampleBlob) !== m.samples.checksum) {
    fail('sample stream checksum mismatch');
  }
  const samples: ReadSample[] = [];
  let pos = 0;
  for (let i = 0; i < m.num_samples; i++) {
    if (pos + 16 > sampleBlob.length) {
      fail(`samples.bin truncated in record ${i} header at byte ${pos}`);
    }
    const sampleId = Number(sampleBlob.readBigUInt64LE(pos));
    const label = sampleBlob.readInt32LE(pos + 8);
    const viewCount = sampleBlob.readUInt32LE(pos + 12);
    pos += 16;
    if (label < -1 || label >= m.num_classes) {
      fail(`sample ${sampleId}: label ${label} outside [-1, ${m.num_classes})`);
    }
    if (!m.variable_views && viewCount !== m.views_per_sample) {
      fail(`sample ${sampleId}: ${viewCount} views != ${m.views_per_sample}`);
    }
    const payload = viewCount * m.dim * 4;
    if (pos + payload > sampleBlob.length) {
      fail(`samples.bin truncated in record ${i} payload at byte ${pos}`);
    }
    samples.push({
      sampleId,
      label,
      viewCount,
      views: f64FromF32le(sampleBlob.subarray(pos, pos + payload)),
    });
    pos += payload;
  }
  if (pos !== sampleBlob.length) {
    fail(`samples.bin has ${sampleBlob.length - pos} trailing bytes`);
  }

  if (m.mask) {
    const maskBlob = readFileSync(join(dir, m.mask.file));
    if (sha256hex(maskBlob) !== m.mask.checksum) fail('mask checksum mismatch');
    let mpos = 0;
    for (const s of samples) {
      if (mpos + 4 > maskBlob.length) fail('mask.bin truncated');
      const count = maskBlob.readUInt32LE(mpos);
      if (count !== s.viewCount) {
        fail(`mask count ${count} != view count ${s.viewCount} for sample ${s.sampleId}`);
      }
      mpos += 4;
      if (mpos + count > maskBlob.length) fail('mask.bin truncated');
      s.mask = Uint8Array.from(maskBlob.subarray(mpos, mpos + count));
      mpos += count;
    }
    if (mpos !== maskBlob.length) fail('mask.bin has trailing bytes');
  }

  return {
    manifest: m,
    identity: sha256hex(manifestBytes),
    tensors,
    samples,
  };
}

function assertShape(t: ReadTensor, expected: number[]): void {
  const ok =
    t.shape.length === expected.length && t.shape.every((v, i) => v === expected[i]);
  if (!ok) fail(`tensor ${t.name}: shape [${t.shape}] != expected [${expected}]`);
}
