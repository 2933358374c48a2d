/**
 * Frame source: a directory of grayscale PGM images with zero-padded
 * numeric names (e.g. 00000.pgm). Both binary (P5) and ASCII (P2) flavors
 * are supported, 8-bit depth only. Decoded frames are held in a bounded
 * LRU cache and re-read on miss, so long sequences stay cheap while old
 * anchor frames remain reachable.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { LruCache } from './lru.js';

export interface Frame {
  width: number;
  height: number;
  /** Row-major 8-bit intensities. */
  pixels: Uint8Array;
}

function tokenize(buf: Buffer): { tokens: string[]; dataOffset: number } {
  // PGM headers are whitespace-separated tokens; '#' starts a comment.
  const tokens: string[] = [];
  let i = 0;
  let current = '';
  while (i < buf.length) {
    const c = buf[i];
    if (c === 0x23) {
      while (i < buf.length && buf[i] !== 0x0a) i += 1;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      if (current) {
        tokens.push(current);
        current = '';
      }
      // For P5 the single whitespace after maxval separates header from data.
      if (tokens.length === 4 && tokens[0] === 'P5') return { tokens, dataOffset: i + 1 };
    } else {
      current += String.fromCharCode(c);
    }
    i += 1;
  }
  if (current) tokens.push(current);
  return { tokens, dataOffset: i };
}

export function parsePgm(buf: Buffer): Frame {
  const { tokens, dataOffset } = tokenize(buf);
  if (tokens.length < 4) throw new Error('truncated PGM header');
  const [magic, w, h, maxval] = tokens;
  const width = Number(w);
  const height = Number(h);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad PGM dimensions ${w}x${h}`);
  }
  if (Number(maxval) > 255) throw new Error('only 8-bit PGM is supported');
  const pixels = new Uint8Array(width * height);
  if (magic === 'P5') {
    if (buf.length < dataOffset + pixels.length) throw new Error('truncated PGM data');
    pixels.set(buf.subarray(dataOffset, dataOffset + pixels.length));
  } else if (magic === 'P2') {
    const values = tokens.slice(4);
    if (values.length < pixels.length) throw new Error('truncated PGM data');
    for (let i = 0; i < pixels.length; i += 1) pixels[i] = Number(values[i]);
  } else {
    throw new Error(`unsupported PGM magic ${magic}`);
  }
  return { width, height, pixels };
}

export function writePgm(filePath: string, frame: Frame): void {
  const header = Buffer.from(`P5\n${frame.width} ${frame.height}\n255\n`, 'ascii');
  fs.writeFileSync(filePath, Buffer.concat([header, Buffer.from(frame.pixels)]));
}

export class FrameSource {
  private readonly files: string[];
  private readonly cache: LruCache<number, Frame>;
  /** Number of frame files decoded from disk; exposed for cache tests. */
  decodeCount = 0;

  constructor(dir: string, cacheSize = 64) {
    if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
      throw new Error(`frame source ${dir} is not a readable directory`);
    }
    const entries = fs
      .readdirSync(dir)
      .filter((name) => /^\d+\.(pgm)$/i.test(name))
      .sort((a, b) => parseInt(a, 10) - parseInt(b, 10));
    if (entries.length === 0) throw new Error(`no frames (NNNN.pgm) found in ${dir}`);
    this.files = entries.map((name) => path.join(dir, name));
    this.cache = new LruCache(cacheSize);
  }

  get numFrames(): number {
    return this.files.length;
  }

  read(index: number): Frame {
    if (!Number.isInteger(index) || index < 0 || index >= this.files.length) {
      throw new Error(`unknown frame_index ${index} (have 0..${this.files.length - 1})`);
    }
    const cached = this.cache.get(index);
    if (cached) return cached;
    const frame = parsePgm(fs.readFileSync(this.files[index]));
    this.decodeCount += 1;
    this.cache.set(index, frame);
    return frame;
  }
}
