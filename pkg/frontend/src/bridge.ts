/**
 * Child-process plumbing for the binding: one shared core process speaking
 * line-delimited JSON over stdio, with request/response correlation by id.
 *
 * Nothing in this file (or in the Python server it spawns) computes
 * watermark quantities; it only moves bytes. The interpreter defaults to
 * `python3` and can be overridden with the TRIMARK_PYTHON environment
 * variable.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { once } from "node:events";
import path from "node:path";
import { createInterface } from "node:readline";
import type { Readable, Writable } from "node:stream";
import { fileURLToPath } from "node:url";

const SERVER_PATH = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "py",
  "bridge_server.py",
);

interface Pending {
  resolve: (reply: Record<string, unknown>) => void;
  reject: (error: Error) => void;
}

export class BridgeProcess {
  private readonly child: ChildProcessByStdio<Writable, Readable, null>;
  private readonly pending = new Map<number, Pending>();
  private nextId = 1;
  private exited = false;

  constructor(pythonBin: string) {
    this.child = spawn(pythonBin, [SERVER_PATH], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    createInterface({ input: this.child.stdout }).on("line", (line) => {
      this.onLine(line);
    });
    const fail = (error: Error) => {
      this.exited = true;
      for (const entry of this.pending.values()) entry.reject(error);
      this.pending.clear();
    };
    this.child.on("exit", (code) => {
      fail(new Error(`bridge process exited with code ${code}`));
    });
    this.child.on("error", (error) => {
      fail(new Error(`bridge process failed to start: ${error.message}`));
    });
  }

  private onLine(line: string): void {
    let message: { id?: unknown; ok?: unknown; error?: unknown };
    try {
      message = JSON.parse(line) as typeof message;
    } catch {
      return; // not a protocol line; ignore
    }
    if (typeof message.id !== "number") return;
    const entry = this.pending.get(message.id);
    if (!entry) return;
    this.pending.delete(message.id);
    if (message.ok === true) {
      entry.resolve(message as Record<string, unknown>);
    } else {
      entry.reject(
        new Error(
          typeof message.error === "string" ? message.error : "bridge error without message",
        ),
      );
    }
  }

  request(op: string, payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.exited) {
      return Promise.reject(new Error("bridge process is not running"));
    }
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.child.stdin.write(JSON.stringify({ id, op, ...payload }) + "\n");
    });
  }

  async dispose(): Promise<void> {
    if (this.exited) return;
    this.child.stdin.end(); // EOF: the server's read loop finishes cleanly
    await once(this.child, "exit");
  }
}

let shared: BridgeProcess | null = null;
let liveHandles = 0;

/** Lease the shared process (starting it on first use). Each successful
 * `configure` holds one lease until its handle is closed. */
export function acquireBridge(): BridgeProcess {
  if (shared === null) {
    shared = new BridgeProcess(process.env.TRIMARK_PYTHON ?? "python3");
  }
  liveHandles += 1;
  return shared;
}

/** Return a lease; the process is shut down when the last one goes. */
export async function releaseBridge(): Promise<void> {
  liveHandles -= 1;
  if (liveHandles <= 0 && shared !== null) {
    const bridge = shared;
    shared = null;
    liveHandles = 0;
    await bridge.dispose();
  }
}
