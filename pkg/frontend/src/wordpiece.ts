/**
 * Wordpiece tokenization over a vocabulary file, following a named model
 * variant's conventions (casing, continuation prefix).
 *
 * The cue markers are not part of any stock vocabulary; they are appended
 * as added special tokens with fresh ids, and always tokenize to exactly
 * one piece.
 */

import { readFileSync } from "node:fs";

export const PAD_TOKEN = "⟨pad⟩";
export const UNK_TOKEN = "⟨unk⟩";
export const MARKER_SINGLE = "⟨token[1]⟩";
export const MARKER_MULTI = "⟨token[2]⟩";
export const MARKERS = [MARKER_SINGLE, MARKER_MULTI];

export interface VariantConventions {
  lowercase: boolean;
  continuation: string;
}

/** Tokenizer conventions of the supported model variants. */
export const KNOWN_VARIANTS: Record<string, VariantConventions> = {
  "bert-base-uncased": { lowercase: true, continuation: "##" },
  "roberta-base": { lowercase: false, continuation: "##" },
  "xlnet-base-cased": { lowercase: false, continuation: "##" },
};

export class WordPieceTokenizer {
  readonly vocab = new Map<string, number>();
  readonly reserved = new Set<string>([PAD_TOKEN, UNK_TOKEN, ...MARKERS]);
  readonly lowercase: boolean;
  readonly continuation: string;
  readonly maxLen: number;
  readonly padId: number;
  readonly unkId: number;

  constructor(
    pieces: string[],
    options: { maxLen: number; lowercase: boolean; continuation?: string },
  ) {
    for (const piece of pieces) {
      if (!this.vocab.has(piece)) this.vocab.set(piece, this.vocab.size);
    }
    // added special tokens: new ids at the end of the stock vocabulary
    for (const symbol of this.reserved) {
      if (!this.vocab.has(symbol)) this.vocab.set(symbol, this.vocab.size);
    }
    this.maxLen = options.maxLen;
    this.lowercase = options.lowercase;
    this.continuation = options.continuation ?? "##";
    this.padId = this.vocab.get(PAD_TOKEN)!;
    this.unkId = this.vocab.get(UNK_TOKEN)!;
  }

  get vocabSize(): number {
    return this.vocab.size;
  }

  /** Greedy longest-match split; whole word falls back to one unknown. */
  tokenizeWord(word: string): Array<[string, number]> {
    if (this.reserved.has(word)) {
      return [[word, this.vocab.get(word)!]];
    }
    const w = this.lowercase ? word.toLowerCase() : word;
    const pieces: string[] = [];
    let start = 0;
    while (start < w.length) {
      let end = w.length;
      let match: string | null = null;
      while (end > start) {
        const sub = w.slice(start, end);
        const piece = start === 0 ? sub : this.continuation + sub;
        if (this.vocab.has(piece)) {
          match = piece;
          break;
        }
        end -= 1;
      }
      if (match === null) return [[UNK_TOKEN, this.unkId]];
      pieces.push(match);
      start = end;
    }
    return pieces.map((p) => [p, this.vocab.get(p)!]);
  }
}

/** One piece per line, comments and blanks ignored. */
export function loadVocabFile(path: string): string[] {
  const lines = readFileSync(path, "utf-8").split(/\r?\n/);
  return lines.map((l) => l.trim()).filter((l) => l.length > 0 && !l.startsWith("#"));
}

export function tokenizerForVariant(
  variant: string,
  vocabPieces: string[],
  maxLen: number,
  overrides?: Partial<VariantConventions>,
): WordPieceTokenizer {
  const known = KNOWN_VARIANTS[variant];
  if (!known && overrides?.lowercase === undefined) {
    const supported = Object.keys(KNOWN_VARIANTS).sort().join(", ");
    throw new Error(
      `unknown model variant '${variant}'; supported: ${supported} ` +
        `(or supply explicit tokenizer conventions for a custom id)`,
    );
  }
  const conventions = { ...(known ?? { lowercase: false, continuation: "##" }), ...overrides };
  return new WordPieceTokenizer(vocabPieces, { maxLen, ...conventions });
}
