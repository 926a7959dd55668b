/**
 * Node.js binding for the tri-set watermarking engine.
 *
 * Exposes exactly three operations, backed by a shared core process:
 *
 *  - {@link configure}: validate parameters and obtain a processor handle
 *  - {@link bias}: apply one decoding step's logit adjustment
 *  - {@link detect}: score a token stream and return the decision report
 *
 * Float arrays cross the process boundary as base64-encoded little-endian
 * IEEE-754 doubles, so values (including -Infinity on red tokens) survive
 * bit-exactly. Watermark keys travel as decimal strings because they may
 * exceed Number.MAX_SAFE_INTEGER.
 */

import { acquireBridge, releaseBridge, type BridgeProcess } from "./bridge.js";
import type { DetectionReport, ProcessorHandle, WatermarkParams } from "./types.js";

export type { DetectionReport, ProcessorHandle, WatermarkParams, WireParams } from "./types.js";

class BoundHandle implements ProcessorHandle {
  readonly id: string;
  readonly bridge: BridgeProcess;
  private closed = false;

  constructor(id: string, bridge: BridgeProcess) {
    this.id = id;
    this.bridge = bridge;
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    try {
      await this.bridge.request("close", { handle: this.id });
    } finally {
      await releaseBridge();
    }
  }
}

function bound(handle: ProcessorHandle): BoundHandle {
  if (!(handle instanceof BoundHandle)) {
    throw new TypeError("not a processor handle from configure()");
  }
  return handle;
}

function encodeFloat64(values: Float64Array): string {
  return Buffer.from(values.buffer, values.byteOffset, values.byteLength).toString("base64");
}

function decodeFloat64(b64: string): Float64Array {
  const raw = Buffer.from(b64, "base64");
  // Copy out of the shared Buffer pool so the Float64Array owns its memory.
  const copy = new Uint8Array(raw.byteLength);
  copy.set(raw);
  return new Float64Array(copy.buffer);
}

/**
 * Validate watermark parameters and return a handle for `bias`/`detect`.
 *
 * Omitted fields take the engine defaults. Rejects with the engine's own
 * message when a field is out of range (for example set proportions that do
 * not sum to 1).
 */
export async function configure(params: WatermarkParams = {}): Promise<ProcessorHandle> {
  const wire: Record<string, unknown> = { ...params };
  if (params.key !== undefined) wire.key = String(params.key);
  const bridge = acquireBridge();
  let reply: Record<string, unknown>;
  try {
    reply = await bridge.request("configure", { params: wire });
  } catch (error) {
    await releaseBridge();
    throw error;
  }
  return new BoundHandle(reply.handle as string, bridge);
}

/**
 * Apply one decoding step's adjustment to a logit vector.
 *
 * `context` is the sequence of already-emitted token ids (only a trailing
 * window of it influences the result; an empty context is valid and keys
 * the step from the watermark key alone). `logits` must be finite and have
 * one entry per vocabulary id. Returns the adjusted logits alongside a
 * 0/1 mask marking the excluded (red) ids, whose entries are -Infinity.
 */
export async function bias(
  handle: ProcessorHandle,
  context: ArrayLike<number>,
  logits: Float64Array,
): Promise<[Float64Array, Uint8Array]> {
  const boundHandle = bound(handle);
  const reply = await boundHandle.bridge.request("bias", {
    handle: boundHandle.id,
    context: Array.from(context),
    logits_b64: encodeFloat64(logits),
  });
  return [
    decodeFloat64(reply.logits_b64 as string),
    Uint8Array.from(reply.red_mask as number[]),
  ];
}

/**
 * Score a token stream for the watermark and return the full report.
 *
 * The report carries the set counts, both test statistics, the combined
 * score against its threshold, the WATERMARKED/CLEAN decision, and the
 * parameters used (with the key as a decimal string).
 */
export async function detect(
  handle: ProcessorHandle,
  tokens: ArrayLike<number>,
): Promise<DetectionReport> {
  const boundHandle = bound(handle);
  const reply = await boundHandle.bridge.request("detect", {
    handle: boundHandle.id,
    tokens: Array.from(tokens),
  });
  return reply.report as unknown as DetectionReport;
}
