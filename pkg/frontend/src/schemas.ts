/**
 * The three JSON Lines schemas shared with the scoring pipeline, plus the
 * validation the pipeline applies on its side.  Everything written by this
 * package is validated here first, so emitted files load cleanly over there.
 */

import { readFileSync, writeFileSync, renameSync, mkdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { MARKERS, PAD_TOKEN } from "./wordpiece.js";

export const CUE_CLASS_ORDER = [1, 2, 3, 4] as const;
export const SCOPE_CLASS_ORDER = [0, 1] as const;
export const ROW_SUM_TOLERANCE = 1e-4;

export type Task = "cue" | "scope";

export interface EncodedInstance {
  instance_id: string;
  task: Task;
  words: string[];
  labels: number[];
  cue_id?: string;
  marker_positions?: number[];
}

export interface TokenizedInstance {
  instance_id: string;
  tokens: string[];
  token_ids: number[];
  word_spans: Array<[number, number]>;
  pad_mask: boolean[];
  labels: number[];
  class_order: number[];
}

export interface ProbabilityRecord {
  instance_id: string;
  class_order: number[];
  probs: number[][];
}

export function classOrderFor(task: Task): number[] {
  return task === "cue" ? [...CUE_CLASS_ORDER] : [...SCOPE_CLASS_ORDER];
}

export function padLabelFor(task: Task): number {
  return task === "cue" ? 4 : 0;
}

export function readJsonl<T>(path: string): T[] {
  const text = readFileSync(path, "utf-8");
  const out: T[] = [];
  text.split(/\r?\n/).forEach((line, index) => {
    if (!line.trim()) return;
    try {
      out.push(JSON.parse(line) as T);
    } catch (err) {
      throw new Error(`${path}:${index + 1}: bad JSON line (${err})`);
    }
  });
  return out;
}

/** Atomic write: temp file in the same directory, then rename. */
export function writeJsonl(path: string, records: unknown[]): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  const tmp = join(dirname(path) || ".", `.${process.pid}.${Date.now()}.tmp`);
  const body = records.map((r) => JSON.stringify(r)).join("\n");
  writeFileSync(tmp, records.length ? body + "\n" : "");
  renameSync(tmp, path);
}

export function validateEncodedInstance(inst: EncodedInstance): void {
  if (typeof inst.instance_id !== "string" || !inst.instance_id) {
    throw new Error("encoded instance without instance_id");
  }
  if (inst.task !== "cue" && inst.task !== "scope") {
    throw new Error(`instance ${inst.instance_id}: unknown task '${inst.task}'`);
  }
  if (!Array.isArray(inst.words) || !Array.isArray(inst.labels)) {
    throw new Error(`instance ${inst.instance_id}: words/labels missing`);
  }
  if (inst.words.length !== inst.labels.length) {
    throw new Error(
      `instance ${inst.instance_id}: ${inst.labels.length} labels for ` +
        `${inst.words.length} words`,
    );
  }
  const alphabet = inst.task === "cue" ? [1, 2, 3] : [0, 1];
  for (const label of inst.labels) {
    if (!alphabet.includes(label)) {
      throw new Error(`instance ${inst.instance_id}: label ${label} outside ${alphabet}`);
    }
  }
}

export function validateTokenizedInstance(ti: TokenizedInstance): void {
  const n = ti.tokens.length;
  for (const [name, arr] of [
    ["token_ids", ti.token_ids],
    ["labels", ti.labels],
    ["pad_mask", ti.pad_mask],
  ] as const) {
    if (arr.length !== n) {
      throw new Error(`instance ${ti.instance_id}: ${name} length ${arr.length} != ${n}`);
    }
  }
  const nReal = ti.pad_mask.filter(Boolean).length;
  for (let i = 0; i < n; i++) {
    if (ti.pad_mask[i] !== i < nReal) {
      throw new Error(`instance ${ti.instance_id}: pad mask is not a prefix mask`);
    }
  }
  let cursor = 0;
  for (const [start, end] of ti.word_spans) {
    if (start !== cursor || end <= start) {
      throw new Error(
        `instance ${ti.instance_id}: spans must tile the non-pad prefix ` +
          `(bad span [${start}, ${end}) at ${cursor})`,
      );
    }
    const first = ti.labels[start];
    for (let i = start; i < end; i++) {
      if (ti.labels[i] !== first) {
        throw new Error(`instance ${ti.instance_id}: labels differ inside a word span`);
      }
    }
    cursor = end;
  }
  if (cursor !== nReal) {
    throw new Error(
      `instance ${ti.instance_id}: spans cover ${cursor} tokens, ${nReal} are non-pad`,
    );
  }
  for (const label of ti.labels) {
    if (!ti.class_order.includes(label)) {
      throw new Error(
        `instance ${ti.instance_id}: label ${label} outside class order ${ti.class_order}`,
      );
    }
  }
}

export function validateProbabilityRecord(rec: ProbabilityRecord, expectedRows?: number): void {
  if (expectedRows !== undefined && rec.probs.length !== expectedRows) {
    throw new Error(
      `instance ${rec.instance_id}: ${rec.probs.length} rows, expected ${expectedRows}`,
    );
  }
  for (const row of rec.probs) {
    if (row.length !== rec.class_order.length) {
      throw new Error(`instance ${rec.instance_id}: row width != class order length`);
    }
    const sum = row.reduce((a, b) => a + b, 0);
    if (Math.abs(sum - 1.0) > ROW_SUM_TOLERANCE) {
      throw new Error(
        `instance ${rec.instance_id}: row sums to ${sum}, beyond ±${ROW_SUM_TOLERANCE}`,
      );
    }
    if (row.some((p) => p < 0)) {
      throw new Error(`instance ${rec.instance_id}: negative probability`);
    }
  }
}

/** Marker words are single-token spans holding a reserved marker form. */
export function markerWordPositions(ti: TokenizedInstance): number[] {
  const out: number[] = [];
  ti.word_spans.forEach(([start, end], wordIndex) => {
    if (end - start === 1 && MARKERS.includes(ti.tokens[start])) {
      out.push(wordIndex);
    }
  });
  return out;
}

export { PAD_TOKEN };
