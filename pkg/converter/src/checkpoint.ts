/**
 * Reader for tfjs-style checkpoints: a model.json whose weightsManifest
 * lists named tensors concatenated into binary shard files. Conv kernels
 * are stored HWIO (height, width, in, out), float32 little-endian.
 */

import { readFile } from 'fs/promises';
import { endianness } from 'os';
import { join, dirname } from 'path';

const HOST_LE = endianness() === 'LE';

/** Decode little-endian float32 bytes; memcpy on LE hosts. */
export function floatsFromBytes(bytes: Buffer): Float32Array {
  if (HOST_LE) {
    return new Float32Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength));
  }
  const out = new Float32Array(bytes.byteLength / 4);
  for (let i = 0; i < out.length; i++) out[i] = bytes.readFloatLE(i * 4);
  return out;
}

/** Encode float32 values as little-endian bytes; zero-copy on LE hosts. */
export function floatsToBytes(values: Float32Array): Buffer {
  if (HOST_LE) {
    return Buffer.from(values.buffer, values.byteOffset, values.byteLength);
  }
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) buf.writeFloatLE(values[i], i * 4);
  return buf;
}

export interface TensorEntry {
  name: string;
  shape: number[];
  data: Float32Array;
}

export interface Checkpoint {
  /** tensors keyed by name */
  tensors: Map<string, TensorEntry>;
  /** channel order of the first conv layer's input ("rgb" | "bgr") */
  channelOrder: string;
  /** preprocessing mean in the checkpoint's own channel order, if recorded */
  preprocessMean: number[] | null;
  modelJsonPath: string;
  /** absolute paths of every weight shard, in manifest order */
  shardFiles: string[];
}

interface ManifestWeight {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: ManifestWeight[];
}

export class CheckpointError extends Error {}

export async function readCheckpoint(modelJsonPath: string): Promise<Checkpoint> {
  let raw: string;
  try {
    raw = await readFile(modelJsonPath, 'utf-8');
  } catch (err) {
    throw new CheckpointError(`cannot read checkpoint ${modelJsonPath}: ${(err as Error).message}`);
  }
  let model: any;
  try {
    model = JSON.parse(raw);
  } catch (err) {
    throw new CheckpointError(`checkpoint ${modelJsonPath} is not valid JSON: ${(err as Error).message}`);
  }
  const groups: ManifestGroup[] = model.weightsManifest;
  if (!Array.isArray(groups) || groups.length === 0) {
    throw new CheckpointError(`checkpoint ${modelJsonPath} has no weightsManifest`);
  }

  const dir = dirname(modelJsonPath);
  const tensors = new Map<string, TensorEntry>();
  const shardFiles: string[] = [];
  for (const group of groups) {
    const buffers: Buffer[] = [];
    for (const shardPath of group.paths) {
      const full = join(dir, shardPath);
      try {
        buffers.push(await readFile(full));
      } catch (err) {
        throw new CheckpointError(`cannot read weight shard ${shardPath}: ${(err as Error).message}`);
      }
      shardFiles.push(full);
    }
    const blob = Buffer.concat(buffers);
    let offset = 0;
    for (const w of group.weights) {
      if (w.dtype !== 'float32') {
        throw new CheckpointError(`tensor ${w.name}: unsupported dtype ${w.dtype}`);
      }
      const count = w.shape.reduce((a, b) => a * b, 1);
      const bytes = count * 4;
      if (offset + bytes > blob.length) {
        throw new CheckpointError(
          `weight shards truncated while reading ${w.name} (need ${bytes} bytes at offset ${offset})`
        );
      }
      const data = floatsFromBytes(blob.subarray(offset, offset + bytes));
      offset += bytes;
      tensors.set(w.name, { name: w.name, shape: w.shape, data });
    }
    if (offset !== blob.length) {
      throw new CheckpointError(
        `weight shards have ${blob.length - offset} trailing bytes after the last tensor`
      );
    }
  }

  const meta = model.userDefinedMetadata ?? {};
  return {
    tensors,
    channelOrder: typeof meta.channelOrder === 'string' ? meta.channelOrder : 'rgb',
    preprocessMean: Array.isArray(meta.preprocessMean) ? meta.preprocessMean : null,
    modelJsonPath,
    shardFiles,
  };
}
