/**
 * Run inference over tokenized instances and write the probability
 * interchange file the scoring pipeline consumes: one JSON line per
 * instance, one probability row per token position (padding included),
 * rows summing to 1.  Inference is deterministic; without trained
 * weights a seed-initialized model is used so files reproduce exactly.
 */

import { existsSync, readFileSync } from "node:fs";
import type { AdapterConfig } from "./config.js";
import { TokenClassifierModel } from "./model.js";
import {
  ProbabilityRecord,
  TokenizedInstance,
  classOrderFor,
  readJsonl,
  validateProbabilityRecord,
  validateTokenizedInstance,
  writeJsonl,
} from "./schemas.js";

export function loadOrInitModel(
  config: AdapterConfig,
  instances: TokenizedInstance[],
): TokenClassifierModel {
  if (existsSync(config.files.weights)) {
    return TokenClassifierModel.fromJSON(JSON.parse(readFileSync(config.files.weights, "utf-8")));
  }
  if (config.fineTune) {
    throw new Error(
      `weights file ${config.files.weights} not found; run 'adapter train' first ` +
        `(or set fineTune to false for a seed-initialized model)`,
    );
  }
  const maxLen = instances[0]?.tokens.length ?? config.maxLen;
  const numClasses = classOrderFor(config.task).length;
  const vocabSize = Math.max(...instances.flatMap((ti) => ti.token_ids), 0) + 1;
  return new TokenClassifierModel(
    { vocabSize, maxLen, hidden: config.model.hidden, ffn: config.model.ffn, numClasses },
    config.train.seed,
  );
}

export function emitProbabilities(
  model: TokenClassifierModel,
  instances: TokenizedInstance[],
): ProbabilityRecord[] {
  const records: ProbabilityRecord[] = [];
  for (const ti of instances) {
    validateTokenizedInstance(ti);
    if (ti.tokens.length !== model.dims.maxLen) {
      throw new Error(
        `instance ${ti.instance_id}: ${ti.tokens.length} positions but the model ` +
          `expects ${model.dims.maxLen}`,
      );
    }
    const record: ProbabilityRecord = {
      instance_id: ti.instance_id,
      class_order: [...ti.class_order],
      probs: model.forward(ti.token_ids, ti.pad_mask),
    };
    validateProbabilityRecord(record, ti.tokens.length);
    records.push(record);
  }
  return records;
}

export function runEmit(config: AdapterConfig): { count: number; out: string } {
  const instances = readJsonl<TokenizedInstance>(config.files.tokenized);
  const model = loadOrInitModel(config, instances);
  const records = emitProbabilities(model, instances);
  writeJsonl(config.files.probs, records);
  return { count: records.length, out: config.files.probs };
}
