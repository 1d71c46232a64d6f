/**
 * Replay parity against the native CLI: identical (seed, action sequence)
 * pairs must produce byte-identical trace files through the binding and
 * through `crosswalk rollout`, with the RL surface (5-dim observation,
 * reward decomposition, terminated/truncated) checked on every step.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { EnvHandle, EXPECTED_ABI, BridgeError, ClosedHandleError } from "../src/env.js";

const PYTHON = process.env.CROSSWALK_PYTHON ?? "python3";
const TRIALS = 100;
const PHIS = [0, 20, 40, 60, 80];
const VARIANTS = ["aware", "reckless", "unaware"] as const;

/** Deterministic 48-bit LCG so the suite replays identically everywhere. */
function lcg(seed: number): () => number {
  let state = BigInt(seed) & 0xffffffffffffn;
  return () => {
    state = (25214903917n * state + 11n) & 0xffffffffffffn;
    return Number(state >> 16n) / 4294967296;
  };
}

function nativeRollout(dir: string, trial: number, seed: number, phi: number,
                       variant: string, actions: number[]): string {
  const actionsPath = join(dir, `actions_${trial}.json`);
  const tracePath = join(dir, `native_${trial}.jsonl`);
  writeFileSync(actionsPath, JSON.stringify(actions));
  const res = spawnSync(PYTHON, [
    "-m", "crosswalk.cli", "rollout",
    "--seed", String(seed),
    "--svo", String(phi),
    "--variant", variant,
    "--actions", actionsPath,
    "--out", tracePath,
  ], { encoding: "utf-8" });
  if (res.status !== 0) {
    throw new Error(`native rollout failed: ${res.stderr}`);
  }
  return readFileSync(tracePath, "utf-8");
}

describe("binding", () => {
  let dir: string;
  let env: EnvHandle;

  beforeAll(async () => {
    dir = mkdtempSync(join(tmpdir(), "crosswalk-parity-"));
    env = await EnvHandle.launch({ python: PYTHON });
  });

  afterAll(async () => {
    await env.close();
    rmSync(dir, { recursive: true, force: true });
  });

  it("announces the expected ABI and observation width", () => {
    expect(env.abi).toBe(EXPECTED_ABI);
    expect(env.obsDim).toBe(5);
    expect(env.version).toMatch(/^\d+\.\d+\.\d+$/);
  });

  it("replays 100 random action sequences bit-identically", async () => {
    for (let trial = 0; trial < TRIALS; trial++) {
      const rand = lcg(1000 + trial);
      const seed = 5000 + trial;
      const phi = PHIS[trial % PHIS.length];
      const variant = VARIANTS[trial % VARIANTS.length];
      const actions = Array.from({ length: 150 }, () => rand() * 2 - 1);

      const native = nativeRollout(dir, trial, seed, phi, variant, actions);

      const reset = await env.reset(seed, { phiDeg: phi, variant });
      expect(reset.obs).toHaveLength(5);
      const lines: string[] = [reset.traceHeader];
      for (const u of actions) {
        const step = await env.step(u);
        expect(step.obs).toHaveLength(5);
        // pass-through identity and reward decomposition, every step
        expect(step.reward).toBe(step.info.r_total);
        const recombined = Math.cos(phi * Math.PI / 180) * step.info.r_car
          + Math.sin(phi * Math.PI / 180) * step.info.r_p;
        expect(Math.abs(step.reward - recombined)).toBeLessThan(1e-9);
        expect(step.terminated && step.truncated).toBe(false);
        lines.push(step.traceLine);
        if (step.terminated || step.truncated) break;
      }
      const bridged = lines.map((l) => l + "\n").join("");
      expect(bridged, `trial ${trial} (seed ${seed}, phi ${phi}, ${variant})`)
        .toBe(native);
    }
  }, 300_000);

  it("rejects stepping a finished episode", async () => {
    await env.reset(42, { phiDeg: 0 });
    for (let i = 0; i < 600; i++) {
      const step = await env.step(1.0);
      if (step.terminated || step.truncated) break;
    }
    await expect(env.step(0.0)).rejects.toBeInstanceOf(BridgeError);
  });
});

describe("closed handles", () => {
  it("fail explicitly after close", async () => {
    const env = await EnvHandle.launch({ python: PYTHON });
    await env.reset(1);
    await env.close();
    await expect(env.step(0.0)).rejects.toBeInstanceOf(ClosedHandleError);
    await env.close(); // idempotent
  });
});
