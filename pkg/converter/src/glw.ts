/**
 * GLW1 binary weight format writer (little-endian):
 *   magic "GLW1", u32 version = 1, 3 x f32 preprocess mean,
 *   u32 layer count, then per layer:
 *     u16 name length, UTF-8 name, u32 dims (out, in, kh, kw),
 *     f32 weights out-major, f32 biases.
 */

import { floatsToBytes } from './checkpoint';
import { OihwKernel } from './forward';

export const GLW_MAGIC = 'GLW1';
export const GLW_VERSION = 1;

export function encodeGlw(kernels: OihwKernel[], mean: [number, number, number]): Buffer {
  const chunks: Buffer[] = [];
  chunks.push(Buffer.from(GLW_MAGIC, 'ascii'));
  const header = Buffer.alloc(4 + 12 + 4);
  header.writeUInt32LE(GLW_VERSION, 0);
  mean.forEach((m, i) => header.writeFloatLE(m, 4 + 4 * i));
  header.writeUInt32LE(kernels.length, 16);
  chunks.push(header);
  for (const kernel of kernels) {
    const name = Buffer.from(kernel.shape.name, 'utf-8');
    const head = Buffer.alloc(2 + name.length + 16);
    head.writeUInt16LE(name.length, 0);
    name.copy(head, 2);
    const dims = [kernel.shape.out, kernel.shape.in, kernel.shape.kh, kernel.shape.kw];
    dims.forEach((d, i) => head.writeUInt32LE(d, 2 + name.length + 4 * i));
    chunks.push(head);
    chunks.push(floatsToBytes(kernel.weights));
    chunks.push(floatsToBytes(kernel.bias));
  }
  return Buffer.concat(chunks);
}
