/**
 * Deterministic synthetic VGG-19 checkpoint generator (tfjs layout:
 * model.json + binary shards). Used by the test suites on both sides of
 * the format boundary; real published checkpoints convert through the
 * exact same path.
 */

import { mkdir, writeFile } from 'fs/promises';
import { join } from 'path';

import { floatsToBytes } from './checkpoint';
import { convTrunk, DEFAULT_MEAN } from './topology';

export interface FixtureOptions {
  channelOrder?: 'rgb' | 'bgr';
  seed?: number;
  shardCount?: number;
}

function mulberry32(seed: number): () => number {
  let state = seed | 0;
  return () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export async function makeFixtureCheckpoint(
  dir: string,
  options: FixtureOptions = {}
): Promise<string> {
  const { channelOrder = 'rgb', seed = 1, shardCount = 2 } = options;
  const next = mulberry32(seed);

  interface NamedTensor {
    name: string;
    shape: number[];
    data: Float32Array;
  }
  const tensors: NamedTensor[] = [];
  for (const layer of convTrunk()) {
    const fanIn = layer.in * layer.kh * layer.kw;
    const limit = Math.sqrt(6 / fanIn); // He-uniform: activations stay O(1)
    const kernel = new Float32Array(layer.kh * layer.kw * layer.in * layer.out);
    for (let i = 0; i < kernel.length; i++) {
      kernel[i] = (2 * next() - 1) * limit;
    }
    const bias = new Float32Array(layer.out);
    for (let i = 0; i < bias.length; i++) {
      bias[i] = (2 * next() - 1) * 0.05;
    }
    tensors.push({ name: `${layer.name}/kernel`, shape: [layer.kh, layer.kw, layer.in, layer.out], data: kernel });
    tensors.push({ name: `${layer.name}/bias`, shape: [layer.out], data: bias });
  }

  const blob = Buffer.concat(tensors.map((t) => floatsToBytes(t.data)));
  const shardSize = Math.ceil(blob.length / shardCount);
  const paths: string[] = [];
  await mkdir(dir, { recursive: true });
  for (let i = 0; i < shardCount; i++) {
    const name = `group1-shard${i + 1}of${shardCount}.bin`;
    await writeFile(join(dir, name), blob.subarray(i * shardSize, (i + 1) * shardSize));
    paths.push(name);
  }

  const mean =
    channelOrder === 'bgr' ? [DEFAULT_MEAN[2], DEFAULT_MEAN[1], DEFAULT_MEAN[0]] : [...DEFAULT_MEAN];
  const model = {
    format: 'graph-model',
    generatedBy: 'glw-convert synthetic fixture',
    userDefinedMetadata: { channelOrder, preprocessMean: mean },
    weightsManifest: [
      {
        paths,
        weights: tensors.map((t) => ({ name: t.name, shape: t.shape, dtype: 'float32' })),
      },
    ],
  };
  const modelJsonPath = join(dir, 'model.json');
  await writeFile(modelJsonPath, JSON.stringify(model, null, 2) + '\n');
  return modelJsonPath;
}
