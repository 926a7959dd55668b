/**
 * Parameter mapping accepted by `configure`; omitted fields take the core's
 * defaults. 64-bit keys may be given as decimal strings — JSON/JS numbers
 * lose integer precision past 2^53.
 */
export interface WatermarkParams {
  gamma_g?: number;
  gamma_y?: number;
  gamma_r?: number;
  delta?: number;
  window_h?: number;
  key?: number | string;
  lambda_f?: number;
  alpha?: number;
  vocab_size?: number;
}

/** Parameters as echoed back inside detection reports (the key is always a
 * decimal string on the wire). */
export interface WireParams {
  gamma_g: number;
  gamma_y: number;
  gamma_r: number;
  delta: number;
  window_h: number;
  key: string;
  lambda_f: number;
  alpha: number;
  vocab_size: number;
}

/** Field-for-field the core detector's report. */
export interface DetectionReport {
  length: number;
  green_count: number;
  red_count: number;
  green_fraction: number;
  red_fraction: number;
  z_green: number;
  z_red: number;
  p_green: number;
  p_red: number;
  fisher_score: number;
  threshold: number;
  decision: "WATERMARKED" | "CLEAN";
  low_confidence: boolean;
  params: WireParams;
}

/**
 * Opaque reference to one configured engine instance inside the bridge
 * process. Every call through a handle sees identical parameters; a handle
 * may be shared freely (calls are reentrant — the core is pure).
 */
export interface ProcessorHandle {
  readonly id: string;
  /** Release the handle. The shared bridge process exits once every handle
   * is closed; closing twice is a no-op. */
  close(): Promise<void>;
}
