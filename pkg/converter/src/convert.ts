/**
 * One-shot conversion of a tfjs-style VGG-19 checkpoint to GLW1, plus a
 * JSON manifest carrying hashes, the shape table, and a reference-
 * activation fixture so the consuming engine can cross-validate its own
 * forward pass against this implementation.
 *
 * All ecosystem-specific conventions (HWIO kernel layout, channel
 * order, embedded mean) are normalized here; the GLW1 output is always
 * OIHW with RGB channel order.
 */

import { createHash } from 'crypto';
import { readFile, writeFile } from 'fs/promises';

import { Checkpoint, CheckpointError, readCheckpoint, TensorEntry } from './checkpoint';
import { Chw, forwardTaps, OihwKernel } from './forward';
import { encodeGlw } from './glw';
import { ConvShape, convTrunk, DEFAULT_MEAN, nameAliases } from './topology';

export class TopologyError extends Error {}

export const FIXTURE_TAPS = ['conv1_1', 'conv4_2'];
export const FIXTURE_SIZE = 16;

export interface FixtureActivations {
  shape: number[];
  values: number[];
}

export interface ConversionManifest {
  format: 'GLW1';
  source: { path: string; sha256: string };
  output: { path: string; sha256: string };
  layers: Array<{ name: string; out: number; in: number; kh: number; kw: number }>;
  preprocessMean: number[];
  channelOrderNote: string;
  fixture: {
    /** flattened 3 x 16 x 16 input, CHW, RGB, mean-subtracted */
    inputShape: number[];
    input: number[];
    activations: Record<string, FixtureActivations>;
  };
}

function findTensor(checkpoint: Checkpoint, layer: string, suffix: string): TensorEntry {
  for (const alias of nameAliases(layer)) {
    const entry = checkpoint.tensors.get(`${alias}/${suffix}`);
    if (entry) return entry;
  }
  throw new TopologyError(`checkpoint is missing ${suffix} for layer ${layer}`);
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** HWIO -> OIHW, optionally permuting the input channels of conv1_1. */
function toOihw(entry: TensorEntry, shape: ConvShape, inPerm: number[] | null): Float32Array {
  const { out, in: cin, kh, kw } = shape;
  const result = new Float32Array(out * cin * kh * kw);
  for (let di = 0; di < kh; di++) {
    for (let dj = 0; dj < kw; dj++) {
      for (let c = 0; c < cin; c++) {
        const src = inPerm ? inPerm[c] : c;
        for (let o = 0; o < out; o++) {
          result[((o * cin + c) * kh + di) * kw + dj] =
            entry.data[((di * kw + dj) * cin + src) * out + o];
        }
      }
    }
  }
  return result;
}

function extractKernels(checkpoint: Checkpoint): OihwKernel[] {
  // a BGR-order checkpoint needs conv1_1's input channels (and the
  // mean) flipped so the GLW1 file is unconditionally RGB
  const bgr = checkpoint.channelOrder.toLowerCase() === 'bgr';
  return convTrunk().map((shape, idx) => {
    const kernel = findTensor(checkpoint, shape.name, 'kernel');
    const bias = findTensor(checkpoint, shape.name, 'bias');
    const expected = [shape.kh, shape.kw, shape.in, shape.out];
    if (!shapesEqual(kernel.shape, expected)) {
      throw new TopologyError(
        `layer ${shape.name}: expected kernel shape [${expected}], checkpoint has [${kernel.shape}]`
      );
    }
    if (!shapesEqual(bias.shape, [shape.out])) {
      throw new TopologyError(
        `layer ${shape.name}: expected bias shape [${shape.out}], checkpoint has [${bias.shape}]`
      );
    }
    const inPerm = bgr && idx === 0 ? [2, 1, 0] : null;
    return { shape, weights: toOihw(kernel, shape, inPerm), bias: bias.data };
  });
}

function resolveMean(checkpoint: Checkpoint): [number, number, number] {
  const mean = checkpoint.preprocessMean ?? DEFAULT_MEAN;
  if (mean.length !== 3) {
    throw new CheckpointError(`preprocess mean must have 3 entries, got ${mean.length}`);
  }
  const rgb = checkpoint.channelOrder.toLowerCase() === 'bgr' ? [mean[2], mean[1], mean[0]] : mean;
  return [rgb[0], rgb[1], rgb[2]];
}

/** Deterministic mean-subtracted fixture input (mulberry32 PRNG). */
export function fixtureInput(mean: [number, number, number]): Chw {
  let state = 0x9e3779b9;
  const next = () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const data = new Float32Array(3 * FIXTURE_SIZE * FIXTURE_SIZE);
  for (let c = 0; c < 3; c++) {
    for (let p = 0; p < FIXTURE_SIZE * FIXTURE_SIZE; p++) {
      data[c * FIXTURE_SIZE * FIXTURE_SIZE + p] = Math.fround(
        Math.floor(next() * 256) - mean[c]
      );
    }
  }
  return { channels: 3, height: FIXTURE_SIZE, width: FIXTURE_SIZE, data };
}

function sha256(data: Buffer): string {
  return createHash('sha256').update(data).digest('hex');
}

export async function convert(
  sourcePath: string,
  outputPath: string,
  manifestPath?: string
): Promise<ConversionManifest> {
  const checkpoint = await readCheckpoint(sourcePath);
  const sourceHash = createHash('sha256');
  sourceHash.update(await readFile(sourcePath));
  for (const shard of checkpoint.shardFiles) {
    sourceHash.update(await readFile(shard));
  }
  const kernels = extractKernels(checkpoint);
  const mean = resolveMean(checkpoint);

  const glw = encodeGlw(kernels, mean);
  await writeFile(outputPath, glw);

  const input = fixtureInput(mean);
  const taps = forwardTaps(input, kernels, FIXTURE_TAPS);
  const activations: Record<string, FixtureActivations> = {};
  for (const name of FIXTURE_TAPS) {
    const act = taps.get(name)!;
    if (!act.data.every(Number.isFinite)) {
      throw new TopologyError(`fixture activations for ${name} are not finite`);
    }
    activations[name] = {
      shape: [act.channels, act.height, act.width],
      values: Array.from(act.data),
    };
  }

  const manifest: ConversionManifest = {
    format: 'GLW1',
    source: { path: sourcePath, sha256: sourceHash.digest('hex') },
    output: { path: outputPath, sha256: sha256(glw) },
    layers: kernels.map(({ shape }) => ({
      name: shape.name,
      out: shape.out,
      in: shape.in,
      kh: shape.kh,
      kw: shape.kw,
    })),
    preprocessMean: mean,
    channelOrderNote:
      `GLW1 weights and mean are RGB; source checkpoint was ${checkpoint.channelOrder}`,
    fixture: {
      inputShape: [3, FIXTURE_SIZE, FIXTURE_SIZE],
      input: Array.from(input.data),
      activations,
    },
  };
  if (manifestPath) {
    await writeFile(manifestPath, JSON.stringify(manifest) + '\n');
  }
  return manifest;
}
