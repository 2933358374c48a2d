import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { FrameSource, parsePgm, writePgm } from '../src/frames.js';
import { SCENE, writeScene } from './helpers.js';

let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'bridge-frames-'));
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe('pgm parsing', () => {
  it('round-trips binary frames', () => {
    const file = path.join(tmp, 'probe.pgm');
    const pixels = Uint8Array.from({ length: 6 }, (_, i) => i * 40);
    writePgm(file, { width: 3, height: 2, pixels });
    const frame = parsePgm(fs.readFileSync(file));
    expect(frame.width).toBe(3);
    expect(frame.height).toBe(2);
    expect(Array.from(frame.pixels)).toEqual(Array.from(pixels));
  });

  it('reads ascii P2 with comments', () => {
    const text = 'P2\n# a comment\n2 2\n255\n0 10\n20 30\n';
    const frame = parsePgm(Buffer.from(text, 'ascii'));
    expect(Array.from(frame.pixels)).toEqual([0, 10, 20, 30]);
  });

  it('rejects deep or truncated images', () => {
    expect(() => parsePgm(Buffer.from('P5\n2 2\n65535\n', 'ascii'))).toThrow(/8-bit/);
    expect(() => parsePgm(Buffer.from('P5\n2 2\n255\nab', 'ascii'))).toThrow(/truncated/);
    expect(() => parsePgm(Buffer.from('P7\n2 2\n255\nabcd', 'ascii'))).toThrow(/magic/);
  });
});

describe('frame source', () => {
  it('orders zero-padded names numerically and bounds the cache', () => {
    const dir = path.join(tmp, 'scene');
    writeScene(dir, 12);
    const source = new FrameSource(dir, 4);
    expect(source.numFrames).toBe(12);
    const first = source.read(0);
    expect(first.width).toBe(SCENE.width);

    for (let i = 0; i < 12; i += 1) source.read(i);
    const decodedOnce = source.decodeCount;
    expect(decodedOnce).toBe(12);
    // Oldest entries were evicted; re-reading them decodes again.
    source.read(0);
    expect(source.decodeCount).toBe(decodedOnce + 1);
    // A cached frame comes back without another decode.
    source.read(0);
    expect(source.decodeCount).toBe(decodedOnce + 1);
  });

  it('rejects unknown frame indices', () => {
    const dir = path.join(tmp, 'scene2');
    writeScene(dir, 3);
    const source = new FrameSource(dir);
    expect(() => source.read(3)).toThrow(/unknown frame_index/);
    expect(() => source.read(-1)).toThrow(/unknown frame_index/);
  });

  it('rejects missing directories', () => {
    expect(() => new FrameSource(path.join(tmp, 'nope'))).toThrow(/directory/);
  });
});
