/**
 * Run-length codec for binary masks, bit-compatible with the core.
 *
 * Row-major scan; runs alternate starting with the count of zeros (the
 * leading zero-run may be 0). Encoding is canonical: no zero-length
 * interior runs, and an all-zero mask is a single run over the whole grid.
 */

export interface Mask {
  width: number;
  height: number;
  /** Row-major bits, length width * height. */
  bits: Uint8Array;
}

export function emptyMask(width: number, height: number): Mask {
  return { width, height, bits: new Uint8Array(width * height) };
}

export function maskArea(mask: Mask): number {
  let n = 0;
  for (const b of mask.bits) n += b;
  return n;
}

export function rleEncode(mask: Mask): number[] {
  const { bits } = mask;
  if (bits.length === 0) return [0];
  const runs: number[] = [];
  let current = 0;
  let count = 0;
  for (const b of bits) {
    const v = b ? 1 : 0;
    if (v === current) {
      count += 1;
    } else {
      runs.push(count);
      current = v;
      count = 1;
    }
  }
  runs.push(count);
  return runs;
}

export function rleDecode(width: number, height: number, runs: number[]): Mask {
  if (width < 0 || height < 0) throw new Error('mask dimensions must be non-negative');
  const total = width * height;
  let sum = 0;
  for (const r of runs) {
    if (!Number.isInteger(r) || r < 0) throw new Error(`bad run length ${r}`);
    sum += r;
  }
  if (sum !== total) throw new Error(`run lengths sum to ${sum}, expected ${total}`);
  const bits = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const r of runs) {
    if (value) bits.fill(1, pos, pos + r);
    pos += r;
    value ^= 1;
  }
  return { width, height, bits };
}
