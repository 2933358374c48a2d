/**
 * Deterministic intensity-profile segmenter.
 *
 * The per-frame "embedding" is the mean intensity under that frame's chosen
 * mask. A predict request assembles a target intensity from the entries
 * named in the memory view: rank-free entries contribute with unit weight,
 * temporally ranked entries with a recency-growing weight (that is the
 * position encoding of this model). Accumulation runs in a canonical entry
 * order, so permuting rank-free entries in a request cannot change the
 * reply, not even in the last floating-point bit.
 *
 * Candidates are the connected regions of pixels within the tolerance band
 * around the target intensity, scored by intensity similarity damped by
 * their size mismatch against the initialization mask.
 */

import { FrameSource, Frame } from './frames.js';
import { MemoryViewEntry } from './protocol.js';
import { Mask, emptyMask, maskArea, rleDecode, rleEncode } from './rle.js';

export interface Candidate {
  runs: number[];
  score: number;
}

export interface ModelParams {
  tolerance: number;
  rankWeight: number;
}

interface Region {
  runs: number[];
  area: number;
  firstPixel: number;
  meanIntensity: number;
}

function meanUnderRuns(pixels: Uint8Array, runs: number[]): number | null {
  let pos = 0;
  let inside = false;
  let sum = 0;
  let count = 0;
  for (const r of runs) {
    if (inside) {
      for (let i = pos; i < pos + r; i += 1) sum += pixels[i];
      count += r;
    }
    pos += r;
    inside = !inside;
  }
  return count > 0 ? sum / count : null;
}

function regionsWithinBand(frame: Frame, center: number, tolerance: number): Region[] {
  const { width, height, pixels } = frame;
  const inBand = new Uint8Array(pixels.length);
  for (let i = 0; i < pixels.length; i += 1) {
    if (Math.abs(pixels[i] - center) <= tolerance) inBand[i] = 1;
  }
  const labels = new Int32Array(pixels.length).fill(-1);
  const regions: Region[] = [];
  const stack: number[] = [];
  for (let start = 0; start < pixels.length; start += 1) {
    if (!inBand[start] || labels[start] >= 0) continue;
    const id = regions.length;
    const bits = new Uint8Array(pixels.length);
    let area = 0;
    let sum = 0;
    stack.push(start);
    labels[start] = id;
    while (stack.length) {
      const p = stack.pop() as number;
      bits[p] = 1;
      area += 1;
      sum += pixels[p];
      const x = p % width;
      const y = (p / width) | 0;
      const neighbors = [
        x > 0 ? p - 1 : -1,
        x + 1 < width ? p + 1 : -1,
        y > 0 ? p - width : -1,
        y + 1 < height ? p + width : -1,
      ];
      for (const q of neighbors) {
        if (q >= 0 && inBand[q] && labels[q] < 0) {
          labels[q] = id;
          stack.push(q);
        }
      }
    }
    regions.push({
      runs: rleEncode({ width, height, bits }),
      area,
      firstPixel: start,
      meanIntensity: sum / area,
    });
  }
  return regions;
}

export class IntensityModel {
  private initMask: Mask | null = null;
  private initArea = 0;
  /** Chosen mask per answered frame, kept as compact runs forever. */
  private chosenRuns = new Map<number, number[]>();

  constructor(
    private readonly frames: FrameSource,
    private readonly params: ModelParams,
  ) {}

  init(width: number, height: number, initRle: number[]): void {
    const first = this.frames.read(0);
    if (first.width !== width || first.height !== height) {
      throw new Error(
        `init is ${width}x${height} but frames are ${first.width}x${first.height}`,
      );
    }
    const mask = rleDecode(width, height, initRle);
    this.initArea = maskArea(mask);
    if (this.initArea === 0) throw new Error('initialization mask is empty');
    this.initMask = mask;
    this.chosenRuns.clear();
    this.chosenRuns.set(0, rleEncode(mask));
  }

  get initialized(): boolean {
    return this.initMask !== null;
  }

  private targetIntensity(view: MemoryViewEntry[]): number {
    // Canonical accumulation order: exact permutation invariance.
    const ordered = [...view].sort(
      (a, b) =>
        a.frame_index - b.frame_index ||
        a.kind.localeCompare(b.kind) ||
        (a.temporal_rank ?? -1) - (b.temporal_rank ?? -1),
    );
    let acc = 0;
    let weightSum = 0;
    for (const entry of ordered) {
      const runs = this.chosenRuns.get(entry.frame_index);
      if (runs === undefined) {
        throw new Error(`unknown frame_index ${entry.frame_index} in memory view`);
      }
      const pixels = this.frames.read(entry.frame_index).pixels;
      const mu = meanUnderRuns(pixels, runs);
      if (mu === null) continue; // empty stored mask teaches nothing
      const weight =
        entry.temporal_rank === null ? 1.0 : 1.0 + this.params.rankWeight * entry.temporal_rank;
      acc += weight * mu;
      weightSum += weight;
    }
    if (weightSum === 0) {
      const initPixels = this.frames.read(0).pixels;
      return meanUnderRuns(initPixels, this.chosenRuns.get(0) as number[]) ?? 128;
    }
    return acc / weightSum;
  }

  predict(frameIndex: number, view: MemoryViewEntry[]): Candidate[] {
    if (!this.initMask) throw new Error('predict before init');
    const frame = this.frames.read(frameIndex);
    const target = this.targetIntensity(view);
    const regions = regionsWithinBand(frame, target, this.params.tolerance);

    const scored = regions
      .map((r) => {
        const similarity = Math.max(0, 1 - Math.abs(r.meanIntensity - target) / 255);
        const ratio = Math.min(r.area, this.initArea) / Math.max(r.area, this.initArea);
        const score = Math.min(1, similarity * Math.sqrt(ratio));
        return { region: r, score };
      })
      .sort((a, b) => b.score - a.score || a.region.firstPixel - b.region.firstPixel);

    const candidates: Candidate[] = scored
      .slice(0, 3)
      .map(({ region, score }) => ({ runs: region.runs, score }));
    const emptyRuns = rleEncode(emptyMask(frame.width, frame.height));
    while (candidates.length < 3) candidates.push({ runs: emptyRuns, score: 0 });

    this.chosenRuns.set(frameIndex, candidates[0].runs);
    return candidates;
  }
}
