import * as fs from 'node:fs';
import * as path from 'node:path';

import { writePgm } from '../src/frames.js';
import { Mask, rleEncode } from '../src/rle.js';

export const SCENE = {
  width: 64,
  height: 48,
  square: 12,
  startX: 6,
  startY: 18,
  background: 40,
  foreground: 200,
};

export function sceneFrame(index: number): {
  pixels: Uint8Array;
  x: number;
  y: number;
} {
  const { width, height, square, startX, startY, background, foreground } = SCENE;
  const pixels = new Uint8Array(width * height).fill(background);
  const x = startX + index; // drifts one pixel right per frame
  const y = startY;
  for (let yy = y; yy < y + square; yy += 1) {
    for (let xx = x; xx < x + square; xx += 1) {
      pixels[yy * width + xx] = foreground;
    }
  }
  return { pixels, x, y };
}

export function writeScene(dir: string, numFrames: number): void {
  fs.mkdirSync(dir, { recursive: true });
  for (let i = 0; i < numFrames; i += 1) {
    const { pixels } = sceneFrame(i);
    writePgm(path.join(dir, `${String(i).padStart(5, '0')}.pgm`), {
      width: SCENE.width,
      height: SCENE.height,
      pixels,
    });
  }
}

export function initMask(): Mask {
  const { width, height, square, startX, startY } = SCENE;
  const bits = new Uint8Array(width * height);
  for (let yy = startY; yy < startY + square; yy += 1) {
    for (let xx = startX; xx < startX + square; xx += 1) {
      bits[yy * width + xx] = 1;
    }
  }
  return { width, height, bits };
}

export function initRuns(): number[] {
  return rleEncode(initMask());
}

export function writeCheckpoint(file: string, extra: Record<string, unknown> = {}): void {
  fs.writeFileSync(file, JSON.stringify({ model_size: 'base', ...extra }));
}

/** Deterministic little PRNG for the fuzz corpus. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}
