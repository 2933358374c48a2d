/**
 * Protocol session: one line in, at most one line out.
 *
 * Malformed or out-of-order messages produce an error reply and the session
 * keeps serving; only shutdown (or end of input) ends it. With trace export
 * enabled, every answered prediction is appended to a replay trace that the
 * core's reader accepts verbatim (trace rows = frames answered, i.e. frame
 * count minus the initialization frame).
 */

import * as fs from 'node:fs';

import { BridgeConfig } from './config.js';
import { FrameSource } from './frames.js';
import { IntensityModel, Candidate } from './model.js';
import {
  InboundMsg,
  MemoryViewEntry,
  encodeMessage,
  errorMessage,
  parseInbound,
} from './protocol.js';

export class BridgeSession {
  private readonly frames: FrameSource;
  private readonly model: IntensityModel;
  private width = 0;
  private height = 0;
  private traceFd: number | null = null;
  closed = false;

  constructor(private readonly config: BridgeConfig) {
    this.frames = new FrameSource(config.framesDir, config.cacheSize);
    this.model = new IntensityModel(this.frames, {
      tolerance: config.tolerance,
      rankWeight: config.rankWeight,
    });
  }

  /** Handle one input line; returns the reply line or null (no reply). */
  handleLine(line: string): string | null {
    if (!line.trim()) return null;
    let msg: InboundMsg;
    try {
      msg = parseInbound(line);
    } catch (exc) {
      return encodeMessage(errorMessage((exc as Error).message));
    }
    try {
      switch (msg.type) {
        case 'init':
          return this.handleInit(msg.width, msg.height, msg.init_rle);
        case 'predict':
          return this.handlePredict(msg.frame_index, msg.memory_view);
        case 'shutdown':
          this.close();
          return null;
      }
    } catch (exc) {
      return encodeMessage(errorMessage((exc as Error).message));
    }
  }

  private handleInit(width: number, height: number, initRle: number[]): string | null {
    this.model.init(width, height, initRle);
    this.width = width;
    this.height = height;
    if (this.config.exportTracePath) {
      if (this.traceFd !== null) fs.closeSync(this.traceFd);
      this.traceFd = fs.openSync(this.config.exportTracePath, 'w');
      const header = {
        type: 'header',
        format: 'damtrack-trace',
        version: 1,
        width,
        height,
        init_mask: initRle,
      };
      fs.writeSync(this.traceFd, JSON.stringify(header) + '\n');
    }
    return null; // init has no success reply
  }

  private handlePredict(frameIndex: number, view: MemoryViewEntry[]): string {
    if (!this.model.initialized) {
      return encodeMessage(errorMessage('predict before init'));
    }
    const candidates = this.model.predict(frameIndex, view);
    this.appendTraceRow(frameIndex, candidates);
    return encodeMessage({
      type: 'prediction',
      candidates: candidates.map((c) => ({ rle: c.runs, score: c.score })),
    });
  }

  private appendTraceRow(frameIndex: number, candidates: Candidate[]): void {
    if (this.traceFd === null) return;
    const row = {
      type: 'frame',
      frame_index: frameIndex,
      width: this.width,
      height: this.height,
      candidates: candidates.map((c) => ({ runs: c.runs, score: c.score })),
      gt_mask: null,
      gt_box: null,
    };
    fs.writeSync(this.traceFd, JSON.stringify(row) + '\n');
  }

  close(): void {
    if (this.traceFd !== null) {
      fs.closeSync(this.traceFd);
      this.traceFd = null;
    }
    this.closed = true;
  }
}
