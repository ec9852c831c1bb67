/**
 * Minimal reference forward pass (conv 3x3 pad 1 + relu, 2x2 average
 * pool between blocks) used only to record fixture activations in the
 * conversion manifest. Accumulation is float64; stored values are
 * float32, matching the engine's output precision well within the 1e-4
 * cross-check tolerance.
 */

import { ConvShape } from './topology';

export interface OihwKernel {
  shape: ConvShape;
  /** weights flattened out-major: [out][in][kh][kw] */
  weights: Float32Array;
  bias: Float32Array;
}

export interface Chw {
  channels: number;
  height: number;
  width: number;
  data: Float32Array;
}

export function conv2d(x: Chw, kernel: OihwKernel): Chw {
  const { out, in: cin, kh, kw } = kernel.shape;
  if (x.channels !== cin) {
    throw new Error(`${kernel.shape.name}: expected ${cin} input channels, got ${x.channels}`);
  }
  const { height: h, width: w } = x;
  const padH = Math.floor(kh / 2);
  const padW = Math.floor(kw / 2);
  const result = new Float32Array(out * h * w);
  for (let o = 0; o < out; o++) {
    for (let i = 0; i < h; i++) {
      for (let j = 0; j < w; j++) {
        let acc = kernel.bias[o];
        for (let c = 0; c < cin; c++) {
          for (let di = 0; di < kh; di++) {
            const si = i + di - padH;
            if (si < 0 || si >= h) continue;
            for (let dj = 0; dj < kw; dj++) {
              const sj = j + dj - padW;
              if (sj < 0 || sj >= w) continue;
              acc +=
                kernel.weights[((o * cin + c) * kh + di) * kw + dj] *
                x.data[(c * h + si) * w + sj];
            }
          }
        }
        result[(o * h + i) * w + j] = acc;
      }
    }
  }
  return { channels: out, height: h, width: w, data: result };
}

export function relu(x: Chw): Chw {
  const data = new Float32Array(x.data.length);
  for (let i = 0; i < data.length; i++) data[i] = x.data[i] > 0 ? x.data[i] : 0;
  return { ...x, data };
}

export function avgPool2(x: Chw): Chw {
  const oh = Math.floor(x.height / 2);
  const ow = Math.floor(x.width / 2);
  const result = new Float32Array(x.channels * oh * ow);
  for (let c = 0; c < x.channels; c++) {
    for (let i = 0; i < oh; i++) {
      for (let j = 0; j < ow; j++) {
        const base = (c * x.height + 2 * i) * x.width + 2 * j;
        result[(c * oh + i) * ow + j] =
          (x.data[base] + x.data[base + 1] + x.data[base + x.width] + x.data[base + x.width + 1]) / 4;
      }
    }
  }
  return { channels: x.channels, height: oh, width: ow, data: result };
}

/** Run the trunk up to the deepest tap, collecting tapped activations. */
export function forwardTaps(
  input: Chw,
  kernels: OihwKernel[],
  taps: string[]
): Map<string, Chw> {
  const wanted = new Set(taps);
  const collected = new Map<string, Chw>();
  let x = input;
  for (const kernel of kernels) {
    // convN_M taps are the conv outputs *before* the rectifier,
    // matching the consuming engine's layer-naming convention
    const pre = conv2d(x, kernel);
    if (wanted.has(kernel.shape.name)) {
      collected.set(kernel.shape.name, pre);
      if (collected.size === wanted.size) break;
    }
    x = relu(pre);
    if (kernel.shape.poolAfter) x = avgPool2(x);
  }
  for (const name of taps) {
    if (!collected.has(name)) throw new Error(`tap ${name} not reached in trunk`);
  }
  return collected;
}
