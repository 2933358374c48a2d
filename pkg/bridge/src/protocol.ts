/**
 * Wire protocol schemas: line-delimited JSON messages with a type tag.
 * Inbound: init, predict, shutdown. Outbound: prediction, error.
 */

import { z } from 'zod';

const nonNegInt = z.number().int().nonnegative();

export const memoryViewEntrySchema = z.object({
  frame_index: nonNegInt,
  kind: z.enum(['init', 'ram', 'ram_latest', 'drm']),
  temporal_rank: nonNegInt.nullable(),
});

export const initSchema = z.object({
  type: z.literal('init'),
  width: nonNegInt,
  height: nonNegInt,
  init_rle: z.array(nonNegInt),
  config: z.record(z.unknown()).default({}),
});

export const predictSchema = z.object({
  type: z.literal('predict'),
  frame_index: nonNegInt,
  memory_view: z.array(memoryViewEntrySchema),
});

export const shutdownSchema = z.object({ type: z.literal('shutdown') });

export const inboundSchema = z.discriminatedUnion('type', [
  initSchema,
  predictSchema,
  shutdownSchema,
]);

export const candidateSchema = z.object({
  rle: z.array(nonNegInt),
  score: z.number().min(0).max(1),
});

export const predictionSchema = z.object({
  type: z.literal('prediction'),
  candidates: z.array(candidateSchema).length(3),
});

export const errorSchema = z.object({
  type: z.literal('error'),
  message: z.string(),
});

export type InitMsg = z.infer<typeof initSchema>;
export type PredictMsg = z.infer<typeof predictSchema>;
export type MemoryViewEntry = z.infer<typeof memoryViewEntrySchema>;
export type PredictionMsg = z.infer<typeof predictionSchema>;
export type ErrorMsg = z.infer<typeof errorSchema>;
export type InboundMsg = z.infer<typeof inboundSchema>;

export function encodeMessage(msg: PredictionMsg | ErrorMsg): string {
  return JSON.stringify(msg);
}

export function errorMessage(message: string): ErrorMsg {
  return { type: 'error', message };
}

/** Parse one inbound line; throws with a readable message on violations. */
export function parseInbound(line: string): InboundMsg {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (exc) {
    throw new Error(`message is not valid JSON: ${(exc as Error).message}`);
  }
  const result = inboundSchema.safeParse(raw);
  if (!result.success) {
    const issue = result.error.issues[0];
    const where = issue?.path?.length ? ` at ${issue.path.join('.')}` : '';
    throw new Error(`protocol violation${where}: ${issue?.message ?? 'invalid message'}`);
  }
  return result.data;
}
