import { describe, expect, it } from "vitest";
import {
  MARKER_MULTI,
  MARKER_SINGLE,
  PAD_TOKEN,
  UNK_TOKEN,
  WordPieceTokenizer,
  tokenizerForVariant,
} from "../src/wordpiece.js";

const PIECES = ["it", "might", "rain", "tom", "##or", "##row"];

describe("wordpiece tokenizer", () => {
  it("splits tomorrow into continuation pieces, one span worth", () => {
    const tok = new WordPieceTokenizer(PIECES, { maxLen: 16, lowercase: true });
    expect(tok.tokenizeWord("tomorrow").map(([p]) => p)).toEqual(["tom", "##or", "##row"]);
  });

  it("lowercases for uncased variants only", () => {
    const uncased = tokenizerForVariant("bert-base-uncased", PIECES, 16);
    expect(uncased.tokenizeWord("It").map(([p]) => p)).toEqual(["it"]);
    const cased = tokenizerForVariant("xlnet-base-cased", PIECES, 16);
    expect(cased.tokenizeWord("It").map(([p]) => p)).toEqual([UNK_TOKEN]);
  });

  it("appends markers and pad as new atomic special tokens", () => {
    const tok = new WordPieceTokenizer(PIECES, { maxLen: 16, lowercase: true });
    for (const symbol of [MARKER_SINGLE, MARKER_MULTI, PAD_TOKEN]) {
      const pieces = tok.tokenizeWord(symbol);
      expect(pieces).toHaveLength(1);
      expect(pieces[0][0]).toBe(symbol);
      expect(pieces[0][1]).toBeGreaterThanOrEqual(PIECES.length); // fresh ids
    }
  });

  it("falls back to a single unknown token", () => {
    const tok = new WordPieceTokenizer(PIECES, { maxLen: 16, lowercase: true });
    expect(tok.tokenizeWord("xylophone")).toEqual([[UNK_TOKEN, tok.unkId]]);
  });

  it("rejects unknown variants, listing the supported ones", () => {
    expect(() => tokenizerForVariant("bert-large-mystery", PIECES, 16)).toThrowError(
      /bert-base-uncased.*roberta-base.*xlnet-base-cased/s,
    );
  });

  it("accepts a custom identifier with explicit conventions", () => {
    const tok = tokenizerForVariant("lab-model-7", PIECES, 16, { lowercase: true });
    expect(tok.tokenizeWord("MIGHT").map(([p]) => p)).toEqual(["might"]);
  });
});
