/**
 * Episodic environment handle over the simulator's stdio bridge.
 *
 * One handle owns one bridge process (one episode stream). The binding is a
 * pure pass-through: every number comes from the native side, and each step
 * carries the native canonical trace line so callers can reproduce trace
 * files byte-for-byte without re-serialising floats.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type BridgeProcess = ChildProcessByStdio<Writable, Readable, null>;

export const EXPECTED_ABI = "crosswalk-env-abi/1";

export type PedVariant = "aware" | "reckless" | "unaware";

export interface ResetOptions {
  phiDeg?: number;
  variant?: PedVariant;
  side?: "top" | "bottom";
}

export interface ResetResult {
  obs: number[];
  traceHeader: string;
}

export interface StepInfo {
  step: number;
  event: string;
  a_cmd: number;
  d_gap: number;
  motivation: number;
  r_car: number;
  r_p: number;
  r_total: number;
  [key: string]: unknown;
}

export interface StepResult {
  obs: number[];
  reward: number;
  terminated: boolean;
  truncated: boolean;
  info: StepInfo;
  traceLine: string;
}

export interface LaunchOptions {
  /** Python interpreter used to run the bridge (default "python3"). */
  python?: string;
  /** Extra CLI arguments, e.g. ["--config", "toolkit.cfg"]. */
  args?: string[];
}

export class ClosedHandleError extends Error {}
export class BridgeError extends Error {}

interface HelloRecord {
  type: "hello";
  abi: string;
  version: string;
  config_hash: string;
  obs_dim: number;
}

export class EnvHandle {
  private proc: BridgeProcess;
  private lines: Interface;
  private queue: string[] = [];
  private waiter: ((line: string) => void) | null = null;
  private closed = false;

  readonly abi: string;
  readonly version: string;
  readonly configHash: string;
  readonly obsDim: number;

  private constructor(proc: BridgeProcess, hello: HelloRecord) {
    this.proc = proc;
    this.lines = createInterface({ input: proc.stdout });
    this.lines.on("line", (line) => {
      if (this.waiter) {
        const w = this.waiter;
        this.waiter = null;
        w(line);
      } else {
        this.queue.push(line);
      }
    });
    this.abi = hello.abi;
    this.version = hello.version;
    this.configHash = hello.config_hash;
    this.obsDim = hello.obs_dim;
  }

  /** Spawn a bridge process and verify its ABI string. */
  static async launch(options: LaunchOptions = {}): Promise<EnvHandle> {
    const python = options.python ?? process.env.CROSSWALK_PYTHON ?? "python3";
    const args = ["-m", "crosswalk.cli", "env-bridge", ...(options.args ?? [])];
    const proc = spawn(python, args, { stdio: ["pipe", "pipe", "inherit"] });
    const hello = await new Promise<HelloRecord>((resolve, reject) => {
      const rl = createInterface({ input: proc.stdout });
      const onError = (err: Error) => reject(new BridgeError(err.message));
      proc.once("error", onError);
      rl.once("line", (line) => {
        rl.close();
        proc.removeListener("error", onError);
        try {
          resolve(JSON.parse(line) as HelloRecord);
        } catch (err) {
          reject(new BridgeError(`bad hello record: ${line}`));
        }
      });
    });
    if (hello.type !== "hello" || hello.abi !== EXPECTED_ABI) {
      proc.kill();
      throw new BridgeError(
        `ABI mismatch: got ${hello.abi ?? "nothing"}, expected ${EXPECTED_ABI}`,
      );
    }
    return new EnvHandle(proc, hello);
  }

  private nextLine(): Promise<string> {
    const queued = this.queue.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    return new Promise((resolve) => {
      this.waiter = resolve;
    });
  }

  private async request(payload: Record<string, unknown>): Promise<any> {
    if (this.closed) throw new ClosedHandleError("handle is closed");
    this.proc.stdin.write(JSON.stringify(payload) + "\n");
    const line = await this.nextLine();
    const record = JSON.parse(line);
    if (record.type === "error") throw new BridgeError(record.message);
    return record;
  }

  /** Start a fresh episode; returns the 5-dim observation. */
  async reset(seed: number, options: ResetOptions = {}): Promise<ResetResult> {
    const record = await this.request({
      op: "reset",
      seed,
      phi_deg: options.phiDeg ?? 0.0,
      variant: options.variant ?? "aware",
      ...(options.side ? { side: options.side } : {}),
    });
    return { obs: record.obs, traceHeader: record.trace_header };
  }

  /** Apply one normalised acceleration command in [-1, 1]. */
  async step(u: number): Promise<StepResult> {
    const record = await this.request({ op: "step", u });
    return {
      obs: record.obs,
      reward: record.reward,
      terminated: record.terminated,
      truncated: record.truncated,
      info: record.info,
      traceLine: record.trace_line,
    };
  }

  /** Shut the bridge down; the handle is unusable afterwards. */
  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.request({ op: "close" });
    } finally {
      this.closed = true;
      this.lines.close();
      this.proc.kill();
    }
  }
}
