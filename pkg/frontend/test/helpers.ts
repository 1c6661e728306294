import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import type { AdapterConfig } from "../src/config.js";
import { DEFAULT_TRAIN } from "../src/config.js";
import { makeRng } from "../src/rng.js";
import type { EncodedInstance } from "../src/schemas.js";
import { MARKER_SINGLE } from "../src/wordpiece.js";

export const FILLERS = ["the", "cat", "dog", "saw", "ran", "fast", "slow", "home", "was", "wet"];
export const CUES = ["might", "may"];

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "adapter-test-"));
}

export function writeVocab(dir: string, extra: string[] = []): string {
  const path = join(dir, "vocab.txt");
  writeFileSync(path, [...FILLERS, ...CUES, ...extra].join("\n") + "\n");
  return path;
}

/** Rule-built cue-task instances: cue lexicon words carry label 1. */
export function makeCueInstances(n: number, seed = 0): EncodedInstance[] {
  const rng = makeRng(seed);
  const pick = (pool: string[]) => pool[Math.floor(rng() * pool.length)];
  const out: EncodedInstance[] = [];
  for (let i = 0; i < n; i++) {
    const length = 4 + Math.floor(rng() * 4);
    const words = Array.from({ length }, () => pick(FILLERS));
    const cueAt = Math.floor(rng() * length);
    words[cueAt] = pick(CUES);
    out.push({
      instance_id: `s${i}::cue`,
      task: "cue",
      words,
      labels: words.map((_, j) => (j === cueAt ? 1 : 3)),
    });
  }
  return out;
}

/** Scope instances mirroring the rule "everything after the cue". */
export function makeScopeInstances(n: number, seed = 0): EncodedInstance[] {
  const rng = makeRng(seed + 1000);
  const pick = (pool: string[]) => pool[Math.floor(rng() * pool.length)];
  const out: EncodedInstance[] = [];
  for (let i = 0; i < n; i++) {
    const length = 4 + Math.floor(rng() * 4);
    const base = Array.from({ length }, () => pick(FILLERS));
    const cueAt = Math.floor(rng() * (length - 1));
    base[cueAt] = pick(CUES);
    const words = [...base.slice(0, cueAt), MARKER_SINGLE, ...base.slice(cueAt)];
    const labels = words.map((_, j) => (j > cueAt + 1 ? 1 : 0));
    out.push({
      instance_id: `s${i}::scope::c0`,
      task: "scope",
      words,
      labels,
      cue_id: "c0",
      marker_positions: [cueAt],
    });
  }
  return out;
}

export function makeConfig(dir: string, overrides: Partial<AdapterConfig> = {}): AdapterConfig {
  return {
    variant: "bert-base-uncased",
    task: "cue",
    maxLen: 16,
    vocabFile: writeVocab(dir),
    fineTune: true,
    train: { ...DEFAULT_TRAIN, learningRate: 1e-2, maxEpochs: 30, earlyStopPatience: 8 },
    model: { hidden: 16, ffn: 32 },
    files: {
      instances: join(dir, "instances.jsonl"),
      tokenized: join(dir, "tokenized.jsonl"),
      weights: join(dir, "weights.json"),
      probs: join(dir, "probs.jsonl"),
    },
    ...overrides,
  };
}
