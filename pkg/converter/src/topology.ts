/**
 * The VGG-19 convolutional trunk: 16 conv layers in 5 blocks with an
 * average pool after each block. Only the trunk is converted; the
 * classifier head is irrelevant to feature extraction.
 */

export interface ConvShape {
  name: string;
  out: number;
  in: number;
  kh: number;
  kw: number;
  /** true if a 2x2 pool follows this layer */
  poolAfter: boolean;
}

const BLOCKS: Array<[number, number]> = [
  // [conv layers in block, output channels]
  [2, 64],
  [2, 128],
  [4, 256],
  [4, 512],
  [4, 512],
];

export function convTrunk(): ConvShape[] {
  const layers: ConvShape[] = [];
  let inChannels = 3;
  BLOCKS.forEach(([count, channels], blockIdx) => {
    for (let i = 0; i < count; i++) {
      layers.push({
        name: `conv${blockIdx + 1}_${i + 1}`,
        out: channels,
        in: inChannels,
        kh: 3,
        kw: 3,
        poolAfter: i === count - 1,
      });
      inChannels = channels;
    }
  });
  return layers;
}

/** Per-channel RGB mean subtracted before the first conv layer. */
export const DEFAULT_MEAN: [number, number, number] = [123.68, 116.779, 103.939];

/**
 * Checkpoint tensor names vary by exporter; accept both the Keras-style
 * block naming and the plain trunk naming.
 */
export function nameAliases(name: string): string[] {
  const m = /^conv(\d)_(\d)$/.exec(name);
  if (!m) return [name];
  return [name, `block${m[1]}_conv${m[2]}`];
}
