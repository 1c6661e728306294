#!/usr/bin/env node
/**
 * adapter tokenize|train|emit --config <path>
 *
 * tokenize: encoded task instances -> tokenized-instance JSONL
 * train:    tokenized instances   -> trained classifier weights
 * emit:     tokenized instances   -> probability interchange JSONL
 */

import { loadConfig } from "./config.js";
import { runEmit } from "./emit.js";
import { runTokenize } from "./tokenize.js";
import { runTrain } from "./train.js";

const USAGE = "usage: adapter tokenize|train|emit --config <path>";

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command || !["tokenize", "train", "emit"].includes(command)) {
    console.error(USAGE);
    return 2;
  }
  const flagIndex = rest.indexOf("--config");
  if (flagIndex < 0 || flagIndex + 1 >= rest.length) {
    console.error(USAGE);
    return 2;
  }
  try {
    const config = loadConfig(rest[flagIndex + 1]);
    if (command === "tokenize") {
      const { count, out } = runTokenize(config);
      console.log(`tokenized ${count} instances -> ${out}`);
    } else if (command === "train") {
      const { epochs, bestEpoch, out } = runTrain(config);
      console.log(`trained for ${epochs} epochs (best ${bestEpoch}) -> ${out}`);
    } else {
      const { count, out } = runEmit(config);
      console.log(`emitted ${count} probability tables -> ${out}`);
    }
    return 0;
  } catch (err) {
    console.error(`error [stage:${command}] ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
