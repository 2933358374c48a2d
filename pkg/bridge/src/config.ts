/**
 * Bridge configuration: a checkpoint file holding the model parameters, a
 * frame source directory, and optional trace export. Model size tags map
 * to tolerance presets; the checkpoint may pin an explicit tolerance.
 */

import * as fs from 'node:fs';

import { z } from 'zod';

export const MODEL_SIZES = ['tiny', 'small', 'base', 'large'] as const;
export type ModelSize = (typeof MODEL_SIZES)[number];

const TOLERANCE_BY_SIZE: Record<ModelSize, number> = {
  tiny: 28,
  small: 24,
  base: 20,
  large: 16,
};

const checkpointSchema = z.object({
  model_size: z.enum(MODEL_SIZES).default('base'),
  tolerance: z.number().positive().optional(),
  rank_weight: z.number().nonnegative().default(0.25),
});

export interface BridgeConfig {
  checkpointPath: string;
  framesDir: string;
  modelSize: ModelSize;
  tolerance: number;
  rankWeight: number;
  cacheSize: number;
  device: string;
  exportTracePath?: string;
}

export function loadBridgeConfig(opts: {
  checkpoint: string;
  frames: string;
  exportTrace?: string;
  cacheSize?: number;
  device?: string;
}): BridgeConfig {
  if (!fs.existsSync(opts.checkpoint)) {
    throw new Error(`checkpoint ${opts.checkpoint} does not exist`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(fs.readFileSync(opts.checkpoint, 'utf-8'));
  } catch (exc) {
    throw new Error(`checkpoint ${opts.checkpoint} is not valid JSON: ${(exc as Error).message}`);
  }
  const parsed = checkpointSchema.safeParse(raw);
  if (!parsed.success) {
    throw new Error(`bad checkpoint: ${parsed.error.issues[0]?.message}`);
  }
  const ck = parsed.data;
  return {
    checkpointPath: opts.checkpoint,
    framesDir: opts.frames,
    modelSize: ck.model_size,
    tolerance: ck.tolerance ?? TOLERANCE_BY_SIZE[ck.model_size],
    rankWeight: ck.rank_weight,
    cacheSize: opts.cacheSize ?? 64,
    device: opts.device ?? 'cpu',
    exportTracePath: opts.exportTrace,
  };
}
