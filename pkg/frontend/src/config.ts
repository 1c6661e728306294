/** Adapter configuration: one JSON file drives tokenize, train and emit. */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";
import type { Task } from "./schemas.js";

export interface TrainSettings {
  learningRate: number;
  batchSize: number;
  maxEpochs: number;
  earlyStopPatience: number;
  seed: number;
}

export interface ModelSettings {
  hidden: number;
  ffn: number;
}

export interface AdapterFiles {
  /** encoded task instances produced by the pipeline (input) */
  instances?: string;
  /** tokenized-instance JSONL (tokenize output / train+emit input) */
  tokenized: string;
  /** optional tokenized validation set for early stopping */
  tokenizedVal?: string;
  /** trained weights (train output / emit input) */
  weights: string;
  /** probability interchange JSONL (emit output) */
  probs: string;
}

export interface AdapterConfig {
  variant: string;
  task: Task;
  maxLen: number;
  vocabFile: string;
  fineTune: boolean;
  tokenizer?: { lowercase?: boolean; continuation?: string };
  train: TrainSettings;
  model: ModelSettings;
  files: AdapterFiles;
}

export const DEFAULT_TRAIN: TrainSettings = {
  learningRate: 3e-5,
  batchSize: 8,
  maxEpochs: 60,
  earlyStopPatience: 6,
  seed: 0,
};

const DEFAULT_MODEL: ModelSettings = { hidden: 32, ffn: 64 };

export function loadConfig(path: string): AdapterConfig {
  let raw: Record<string, unknown>;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`config ${path}: ${err}`);
  }
  const base = dirname(resolve(path));
  const resolveMaybe = (p: unknown) => (typeof p === "string" ? resolve(base, p) : undefined);

  const task = raw.task;
  if (task !== "cue" && task !== "scope") {
    throw new Error(`config ${path}: task must be 'cue' or 'scope', got '${task}'`);
  }
  if (typeof raw.variant !== "string" || !raw.variant) {
    throw new Error(`config ${path}: missing model variant identifier`);
  }
  if (typeof raw.vocabFile !== "string") {
    throw new Error(`config ${path}: missing vocabFile`);
  }
  const files = (raw.files ?? {}) as Record<string, unknown>;
  const tokenized = resolveMaybe(files.tokenized);
  if (!tokenized) {
    throw new Error(`config ${path}: files.tokenized is required`);
  }
  return {
    variant: raw.variant,
    task,
    maxLen: typeof raw.maxLen === "number" ? raw.maxLen : 128,
    vocabFile: resolve(base, raw.vocabFile),
    fineTune: raw.fineTune !== false,
    tokenizer: raw.tokenizer as AdapterConfig["tokenizer"],
    train: { ...DEFAULT_TRAIN, ...((raw.train ?? {}) as Partial<TrainSettings>) },
    model: { ...DEFAULT_MODEL, ...((raw.model ?? {}) as Partial<ModelSettings>) },
    files: {
      instances: resolveMaybe(files.instances),
      tokenized,
      tokenizedVal: resolveMaybe(files.tokenizedVal),
      weights: resolveMaybe(files.weights) ?? resolve(base, "adapter-weights.json"),
      probs: resolveMaybe(files.probs) ?? resolve(base, "adapter-probs.jsonl"),
    },
  };
}
