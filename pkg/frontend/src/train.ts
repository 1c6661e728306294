/**
 * Train the token classifier on tokenized instances.
 *
 * Class weights follow the pipeline convention: the pad class gets
 * weight 0 for cue detection; scope training instead masks pads.  Early
 * stopping watches word-level F1 on the validation file (average
 * aggregation, markers excluded) and the best epoch's weights are kept.
 */

import { writeFileSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";
import type { AdapterConfig, TrainSettings } from "./config.js";
import { Adam, TokenClassifierModel } from "./model.js";
import { makeRng, permutation } from "./rng.js";
import {
  Task,
  TokenizedInstance,
  markerWordPositions,
  readJsonl,
  validateTokenizedInstance,
} from "./schemas.js";

export function classWeights(task: Task, numClasses: number): number[] {
  const weights = new Array(numClasses).fill(1);
  if (task === "cue") weights[numClasses - 1] = 0; // pad class
  return weights;
}

export function labelIndex(instance: TokenizedInstance): number[] {
  const lookup = new Map(instance.class_order.map((c, i) => [c, i]));
  return instance.labels.map((label) => {
    const idx = lookup.get(label);
    if (idx === undefined) {
      throw new Error(`instance ${instance.instance_id}: label ${label} outside class order`);
    }
    return idx;
  });
}

/** Argmax with ties resolved toward the lowest class index. */
function argmax(row: number[]): number {
  let best = 0;
  for (let j = 1; j < row.length; j++) if (row[j] > row[best]) best = j;
  return best;
}

export function wordPredictions(
  instance: TokenizedInstance,
  probs: number[][],
): { predicted: number[]; gold: number[] } {
  const markers = new Set(markerWordPositions(instance));
  const predicted: number[] = [];
  const gold: number[] = [];
  instance.word_spans.forEach(([start, end], wordIndex) => {
    if (markers.has(wordIndex)) return;
    const mean = new Array(instance.class_order.length).fill(0);
    for (let t = start; t < end; t++) {
      for (let c = 0; c < mean.length; c++) mean[c] += probs[t][c];
    }
    for (let c = 0; c < mean.length; c++) mean[c] /= end - start;
    predicted.push(instance.class_order[argmax(mean)]);
    gold.push(instance.labels[start]);
  });
  return { predicted, gold };
}

export function wordF1(task: Task, pairs: Array<{ predicted: number[]; gold: number[] }>): number {
  const positive = task === "cue" ? new Set([1, 2]) : new Set([1]);
  let tp = 0;
  let fp = 0;
  let fn = 0;
  for (const { predicted, gold } of pairs) {
    for (let i = 0; i < gold.length; i++) {
      const p = positive.has(predicted[i]);
      const g = positive.has(gold[i]);
      if (p && g) tp += 1;
      else if (p) fp += 1;
      else if (g) fn += 1;
    }
  }
  const precision = tp + fp ? tp / (tp + fp) : 0;
  const recall = tp + fn ? tp / (tp + fn) : 0;
  return precision + recall ? (2 * precision * recall) / (precision + recall) : 0;
}

export function validationF1(
  model: TokenClassifierModel,
  task: Task,
  instances: TokenizedInstance[],
): number {
  const pairs = instances.map((ti) => wordPredictions(ti, model.forward(ti.token_ids, ti.pad_mask)));
  return wordF1(task, pairs);
}

export interface TrainResult {
  model: TokenClassifierModel;
  history: Array<{ epoch: number; trainLoss: number; valF1: number | null }>;
  bestEpoch: number;
}

export function trainModel(
  task: Task,
  trainInstances: TokenizedInstance[],
  valInstances: TokenizedInstance[],
  dims: { hidden: number; ffn: number },
  settings: TrainSettings,
): TrainResult {
  if (trainInstances.length === 0) throw new Error("empty training set");
  trainInstances.forEach(validateTokenizedInstance);
  valInstances.forEach(validateTokenizedInstance);

  const maxLen = trainInstances[0].tokens.length;
  const numClasses = trainInstances[0].class_order.length;
  const vocabSize =
    Math.max(...trainInstances.flatMap((ti) => ti.token_ids), 0) + 1;
  const model = new TokenClassifierModel(
    { vocabSize, maxLen, hidden: dims.hidden, ffn: dims.ffn, numClasses },
    settings.seed,
  );
  const optimizer = new Adam(model, settings.learningRate);
  const weights = classWeights(task, numClasses);
  const labelIdx = trainInstances.map(labelIndex);
  const shuffle = makeRng(settings.seed + 1);

  const history: TrainResult["history"] = [];
  let bestF1 = -Infinity;
  let bestEpoch = 0;
  let bestWeights: object | null = null;

  for (let epoch = 1; epoch <= settings.maxEpochs; epoch++) {
    const order = permutation(trainInstances.length, shuffle);
    let epochLoss = 0;
    let nBatches = 0;
    for (let lo = 0; lo < order.length; lo += settings.batchSize) {
      const batch = order.slice(lo, lo + settings.batchSize);
      let denom = 0;
      for (const i of batch) {
        const ti = trainInstances[i];
        for (let t = 0; t < maxLen; t++) {
          if (ti.pad_mask[t]) denom += weights[labelIdx[i][t]];
        }
      }
      if (denom === 0) continue;
      model.zeroGrads();
      let lossSum = 0;
      for (const i of batch) {
        const ti = trainInstances[i];
        lossSum += model.forwardBackward(
          ti.token_ids, ti.pad_mask, labelIdx[i], weights, 1 / denom,
        );
      }
      optimizer.step();
      epochLoss += lossSum / denom;
      nBatches += 1;
    }
    const valF1 = valInstances.length ? validationF1(model, task, valInstances) : null;
    history.push({ epoch, trainLoss: epochLoss / Math.max(nBatches, 1), valF1 });

    if (valF1 !== null) {
      if (valF1 > bestF1) {
        bestF1 = valF1;
        bestEpoch = epoch;
        bestWeights = model.toJSON();
      }
      if (epoch - bestEpoch >= settings.earlyStopPatience) break;
    }
  }

  const finalModel = bestWeights
    ? TokenClassifierModel.fromJSON(bestWeights as Parameters<typeof TokenClassifierModel.fromJSON>[0])
    : model;
  return { model: finalModel, history, bestEpoch: bestWeights ? bestEpoch : history.length };
}

export function runTrain(config: AdapterConfig): {
  epochs: number;
  bestEpoch: number;
  out: string;
} {
  if (!config.fineTune) {
    throw new Error("config.fineTune is false; 'adapter train' has nothing to do");
  }
  const trainInstances = readJsonl<TokenizedInstance>(config.files.tokenized);
  const valInstances = config.files.tokenizedVal
    ? readJsonl<TokenizedInstance>(config.files.tokenizedVal)
    : [];
  const result = trainModel(config.task, trainInstances, valInstances, config.model, config.train);
  mkdirSync(dirname(config.files.weights) || ".", { recursive: true });
  writeFileSync(config.files.weights, JSON.stringify(result.model.toJSON()));
  return {
    epochs: result.history.length,
    bestEpoch: result.bestEpoch,
    out: config.files.weights,
  };
}
