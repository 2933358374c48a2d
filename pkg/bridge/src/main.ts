/**
 * Entry point: `serve` reads protocol messages from stdin and answers on
 * stdout; diagnostics go to stderr. Exit codes: 0 clean shutdown or end of
 * input, 2 configuration error.
 */

import * as readline from 'node:readline';
import { parseArgs } from 'node:util';

import { loadBridgeConfig } from './config.js';
import { BridgeSession } from './server.js';

function usage(): never {
  process.stderr.write(
    'usage: main.js serve --checkpoint <file.json> --frames <dir> ' +
      '[--export-trace <file>] [--cache-size <n>] [--device <tag>]\n',
  );
  process.exit(2);
}

export function main(argv: string[]): void {
  const command = argv[0];
  if (command !== 'serve') usage();
  let values;
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: {
        checkpoint: { type: 'string' },
        frames: { type: 'string' },
        'export-trace': { type: 'string' },
        'cache-size': { type: 'string' },
        device: { type: 'string' },
      },
    }));
  } catch (exc) {
    process.stderr.write(`${(exc as Error).message}\n`);
    usage();
  }
  if (!values.checkpoint || !values.frames) usage();

  let session: BridgeSession;
  try {
    const config = loadBridgeConfig({
      checkpoint: values.checkpoint,
      frames: values.frames,
      exportTrace: values['export-trace'],
      cacheSize: values['cache-size'] ? Number(values['cache-size']) : undefined,
      device: values.device,
    });
    session = new BridgeSession(config);
    process.stderr.write(
      `bridge: serving ${config.framesDir} (model ${config.modelSize}, tolerance ${config.tolerance})\n`,
    );
  } catch (exc) {
    process.stderr.write(`bridge: ${(exc as Error).message}\n`);
    process.exit(2);
  }

  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  rl.on('line', (line) => {
    const reply = session.handleLine(line);
    if (reply !== null) process.stdout.write(reply + '\n');
    if (session.closed) {
      // Release stdin and let stdout drain naturally instead of forcing an
      // exit that could truncate the final reply on a pipe.
      rl.close();
      process.stdin.destroy();
      process.exitCode = 0;
    }
  });
  rl.on('close', () => {
    session.close();
    process.exitCode = 0;
  });
}

main(process.argv.slice(2));
