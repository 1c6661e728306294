/**
 * Encoded task instances -> tokenized-instance JSONL.
 *
 * Every word's label is copied to each of its subword tokens; the word ->
 * token-span table is kept so the pipeline can aggregate per-token
 * probabilities back to words.  Sequences beyond the maximum length are
 * an error, never a silent truncation.
 */

import type { AdapterConfig } from "./config.js";
import {
  EncodedInstance,
  TokenizedInstance,
  classOrderFor,
  padLabelFor,
  readJsonl,
  validateEncodedInstance,
  validateTokenizedInstance,
  writeJsonl,
} from "./schemas.js";
import { PAD_TOKEN, WordPieceTokenizer, loadVocabFile, tokenizerForVariant } from "./wordpiece.js";

export function buildTokenizer(config: AdapterConfig): WordPieceTokenizer {
  const pieces = loadVocabFile(config.vocabFile);
  return tokenizerForVariant(config.variant, pieces, config.maxLen, config.tokenizer);
}

export function tokenizeInstance(
  inst: EncodedInstance,
  tokenizer: WordPieceTokenizer,
): TokenizedInstance {
  validateEncodedInstance(inst);
  const tokens: string[] = [];
  const tokenIds: number[] = [];
  const labels: number[] = [];
  const spans: Array<[number, number]> = [];
  inst.words.forEach((word, wordIndex) => {
    const start = tokens.length;
    for (const [piece, id] of tokenizer.tokenizeWord(word)) {
      tokens.push(piece);
      tokenIds.push(id);
      labels.push(inst.labels[wordIndex]);
    }
    spans.push([start, tokens.length]);
  });
  if (tokens.length > tokenizer.maxLen) {
    throw new Error(
      `instance ${inst.instance_id} needs ${tokens.length} tokens but the maximum ` +
        `input length is ${tokenizer.maxLen}; refusing to truncate`,
    );
  }
  const padLabel = padLabelFor(inst.task);
  const nReal = tokens.length;
  while (tokens.length < tokenizer.maxLen) {
    tokens.push(PAD_TOKEN);
    tokenIds.push(tokenizer.padId);
    labels.push(padLabel);
  }
  const tokenized: TokenizedInstance = {
    instance_id: inst.instance_id,
    tokens,
    token_ids: tokenIds,
    word_spans: spans,
    pad_mask: tokens.map((_, i) => i < nReal),
    labels,
    class_order: classOrderFor(inst.task),
  };
  validateTokenizedInstance(tokenized);
  return tokenized;
}

export function runTokenize(config: AdapterConfig): { count: number; out: string } {
  if (!config.files.instances) {
    throw new Error("config.files.instances is required for 'adapter tokenize'");
  }
  const tokenizer = buildTokenizer(config);
  const instances = readJsonl<EncodedInstance>(config.files.instances);
  const tokenized = instances.map((inst) => tokenizeInstance(inst, tokenizer));
  writeJsonl(config.files.tokenized, tokenized);
  return { count: tokenized.length, out: config.files.tokenized };
}
