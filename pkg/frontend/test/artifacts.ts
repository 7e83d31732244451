/** Helpers shared by the exporter tests: on-disk tfjs artifacts, a seeded
 * RNG, and a reference descent for exported tree JSON. */

import { writeFileSync } from "node:fs";
import { join } from "node:path";

import * as tf from "@tensorflow/tfjs";

import { PredictorJson, TreeNodeJson } from "../src/schema";

/** Save a layers model in the standard model.json + weights.bin layout. */
export async function saveModelToDir(model: tf.LayersModel, dir: string): Promise<string> {
  const artifacts = await new Promise<tf.io.ModelArtifacts>((resolve) => {
    void model.save(
      tf.io.withSaveHandler(async (a) => {
        resolve(a);
        return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
      }),
    );
  });
  const weightData = artifacts.weightData!;
  const parts = Array.isArray(weightData) ? weightData : [weightData];
  writeFileSync(join(dir, "weights.bin"), Buffer.concat(parts.map((p) => Buffer.from(p))));
  const modelJson = {
    modelTopology: artifacts.modelTopology,
    format: artifacts.format,
    generatedBy: artifacts.generatedBy,
    convertedBy: artifacts.convertedBy,
    weightsManifest: [{ paths: ["weights.bin"], weights: artifacts.weightSpecs }],
  };
  const path = join(dir, "model.json");
  writeFileSync(path, JSON.stringify(modelJson));
  return path;
}

/** Small deterministic LCG so model corpora are reproducible. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

const ACTIVATIONS = ["relu", "sigmoid", "tanh", "softplus"] as const;

export function randomSequential(rand: () => number): { model: tf.Sequential; nIn: number } {
  const nIn = 1 + Math.floor(rand() * 5);
  const depth = 1 + Math.floor(rand() * 3);
  const model = tf.sequential();
  let input = nIn;
  for (let d = 0; d < depth; d++) {
    const units = 1 + Math.floor(rand() * 8);
    const last = d === depth - 1;
    const activation =
      last && rand() < 0.2 ? "softmax" : ACTIVATIONS[Math.floor(rand() * ACTIVATIONS.length)];
    model.add(
      tf.layers.dense({
        units,
        activation,
        inputShape: d === 0 ? [input] : undefined,
        useBias: rand() < 0.9,
      }),
    );
    input = units;
  }
  return { model, nIn };
}

/** Forward pass through exported predictor JSON, mirroring the consumer's
 * semantics (ties descend left). Used to validate tree exports locally. */
export function descend(node: TreeNodeJson, x: number[]): number {
  if ("value" in node) {
    return node.value;
  }
  return x[node.feature] <= node.threshold ? descend(node.left, x) : descend(node.right, x);
}

export function predictTreeJson(p: PredictorJson, x: number[]): number {
  if (p.type === "decision_tree") {
    return descend(p.root, x);
  }
  if (p.type === "random_forest") {
    const vals = p.trees.map((t) => descend(t.root, x));
    return vals.reduce((a, b) => a + b, 0) / vals.length;
  }
  throw new Error(`not a tree predictor: ${p.type}`);
}
