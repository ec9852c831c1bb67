#!/usr/bin/env node
/**
 * GLW1 conversion CLI.
 *
 * Usage:
 *   node dist/cli.js convert <model.json> <out.glw> [--manifest <out.json>]
 *   node dist/cli.js make-fixture <dir> [--channel-order rgb|bgr] [--seed N]
 */

import { convert } from './convert';
import { makeFixtureCheckpoint } from './make-fixture';

function printHelp(): void {
  console.log(`glw-convert: VGG-19 checkpoint -> GLW1 weight file

Commands:
  convert <model.json> <out.glw> [--manifest <out.json>]
      Convert a tfjs-style checkpoint; optionally write the conversion
      manifest (hashes, shape table, activation fixture) as JSON.

  make-fixture <dir> [--channel-order rgb|bgr] [--seed N]
      Write a deterministic synthetic VGG-19 checkpoint for testing.
`);
}

async function main(): Promise<number> {
  const argv = process.argv.slice(2);
  const command = argv[0];
  if (!command || command === '--help' || command === '-h') {
    printHelp();
    return command ? 0 : 1;
  }

  if (command === 'convert') {
    const [source, output] = argv.slice(1, 3);
    if (!source || !output) {
      console.error('convert requires <model.json> and <out.glw>');
      return 1;
    }
    let manifestPath: string | undefined;
    const mIdx = argv.indexOf('--manifest');
    if (mIdx >= 0) {
      manifestPath = argv[mIdx + 1];
      if (!manifestPath) {
        console.error('--manifest requires a path');
        return 1;
      }
    }
    const manifest = await convert(source, output, manifestPath);
    console.log(`wrote ${output} (sha256 ${manifest.output.sha256})`);
    if (manifestPath) console.log(`wrote ${manifestPath}`);
    return 0;
  }

  if (command === 'make-fixture') {
    const dir = argv[1];
    if (!dir) {
      console.error('make-fixture requires <dir>');
      return 1;
    }
    const coIdx = argv.indexOf('--channel-order');
    const seedIdx = argv.indexOf('--seed');
    const modelJson = await makeFixtureCheckpoint(dir, {
      channelOrder: coIdx >= 0 ? (argv[coIdx + 1] as 'rgb' | 'bgr') : 'rgb',
      seed: seedIdx >= 0 ? parseInt(argv[seedIdx + 1], 10) : 1,
    });
    console.log(`wrote ${modelJson}`);
    return 0;
  }

  console.error(`unknown command: ${command}`);
  printHelp();
  return 1;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${(err as Error).message}`);
    process.exit(2);
  });
