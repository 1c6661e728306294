import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { buildTokenizer, runTokenize, tokenizeInstance } from "../src/tokenize.js";
import {
  EncodedInstance,
  TokenizedInstance,
  readJsonl,
  validateTokenizedInstance,
  writeJsonl,
} from "../src/schemas.js";
import { MARKER_SINGLE, WordPieceTokenizer } from "../src/wordpiece.js";
import { makeConfig, makeCueInstances, makeScopeInstances, tempDir } from "./helpers.js";

const VOCAB = ["it", "might", "rain", "tom", "##or", "##row"];

function exampleCue(): EncodedInstance {
  return {
    instance_id: "S1::cue",
    task: "cue",
    words: ["It", "might", "rain", "tomorrow"],
    labels: [3, 1, 3, 3],
  };
}

describe("tokenize to the shared schema", () => {
  it("propagates word labels to every subword, pads with label 4", () => {
    const tok = new WordPieceTokenizer(VOCAB, { maxLen: 10, lowercase: true });
    const ti = tokenizeInstance(exampleCue(), tok);
    expect(ti.labels).toEqual([3, 1, 3, 3, 3, 3, 4, 4, 4, 4]);
    expect(ti.pad_mask).toEqual([true, true, true, true, true, true, false, false, false, false]);
    expect(ti.word_spans).toEqual([[0, 1], [1, 2], [2, 3], [3, 6]]);
  });

  it("one span covers all of a split word's pieces", () => {
    const tok = new WordPieceTokenizer(VOCAB, { maxLen: 10, lowercase: true });
    const ti = tokenizeInstance(exampleCue(), tok);
    const [start, end] = ti.word_spans[3];
    expect(ti.tokens.slice(start, end)).toEqual(["tom", "##or", "##row"]);
  });

  it("marker words map to a single-token span", () => {
    const tok = new WordPieceTokenizer(VOCAB, { maxLen: 12, lowercase: true });
    const inst: EncodedInstance = {
      instance_id: "S1::scope::X1",
      task: "scope",
      words: ["It", MARKER_SINGLE, "might", "rain", "tomorrow"],
      labels: [0, 0, 0, 1, 1],
      cue_id: "X1",
      marker_positions: [1],
    };
    const ti = tokenizeInstance(inst, tok);
    const [start, end] = ti.word_spans[1];
    expect(end - start).toBe(1);
    expect(ti.tokens[start]).toBe(MARKER_SINGLE);
    // scope pads carry label 0
    expect(ti.labels.slice(7)).toEqual([0, 0, 0, 0, 0]);
  });

  it("refuses to truncate oversized instances", () => {
    const tok = new WordPieceTokenizer(VOCAB, { maxLen: 4, lowercase: true });
    expect(() => tokenizeInstance(exampleCue(), tok)).toThrowError(/S1::cue.*truncate/s);
  });

  it("empty input file produces an empty output file", () => {
    const dir = tempDir();
    const config = makeConfig(dir);
    writeJsonl(config.files.instances!, []);
    const { count } = runTokenize(config);
    expect(count).toBe(0);
    expect(readFileSync(config.files.tokenized, "utf-8")).toBe("");
  });

  it("round-trips both task shapes through files, validator-clean", () => {
    const dir = tempDir();
    const config = makeConfig(dir);
    const instances = [...makeCueInstances(5), ...makeScopeInstances(5)];
    writeJsonl(config.files.instances!, instances);
    const { count } = runTokenize(config);
    expect(count).toBe(10);
    const tokenized = readJsonl<TokenizedInstance>(config.files.tokenized);
    tokenized.forEach(validateTokenizedInstance);
    expect(tokenized.map((t) => t.instance_id)).toEqual(instances.map((i) => i.instance_id));
    expect(new Set(tokenized.map((t) => t.tokens.length))).toEqual(new Set([config.maxLen]));
  });

  it("unknown variant fails before touching files", () => {
    const dir = tempDir();
    const config = makeConfig(dir, { variant: "mystery-model" });
    expect(() => buildTokenizer(config)).toThrowError(/supported:/);
  });
});
