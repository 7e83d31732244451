/**
 * Convert a TensorFlow.js layers-model (model.json + weight shards) into
 * portable predictor JSON.
 *
 * The artifacts are parsed directly: Dense layers become "affine" entries
 * (weights transposed to output-major rows, float32 up-cast to double), and
 * activations, fused or standalone, become their tags. Anything else aborts
 * with the offending layer named.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";

import {
  FormatError,
  PipelineJson,
  PredictorJson,
  UnsupportedLayerError,
} from "./schema.js";

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

interface Tensor {
  shape: number[];
  data: Float32Array;
}

function loadWeights(manifest: ManifestGroup[], baseDir: string): Map<string, Tensor> {
  const out = new Map<string, Tensor>();
  for (const group of manifest) {
    const buffers = group.paths.map((p) => readFileSync(join(baseDir, p)));
    const blob = Buffer.concat(buffers);
    let offset = 0;
    for (const spec of group.weights) {
      if (spec.dtype !== "float32") {
        throw new UnsupportedLayerError(`weight ${spec.name} of dtype ${spec.dtype}`);
      }
      const count = spec.shape.reduce((a, b) => a * b, 1);
      const bytes = blob.subarray(offset, offset + 4 * count);
      out.set(spec.name, {
        shape: spec.shape,
        data: new Float32Array(bytes.buffer, bytes.byteOffset, count),
      });
      offset += 4 * count;
    }
  }
  return out;
}

const ACTIVATION_TAGS: Record<string, PredictorJson | null> = {
  linear: null,
  relu: { type: "relu" },
  sigmoid: { type: "sigmoid" },
  tanh: { type: "tanh" },
  softplus: { type: "softplus" },
  softmax: { type: "softmax" },
};

function pushActivation(layers: PredictorJson[], name: string, context: string): void {
  if (!(name in ACTIVATION_TAGS)) {
    throw new UnsupportedLayerError(`${context} activation '${name}'`);
  }
  const tag = ACTIVATION_TAGS[name];
  if (tag !== null) {
    layers.push(tag);
  }
}

function denseToAffine(config: any, weights: Map<string, Tensor>): PredictorJson {
  const kernel = weights.get(`${config.name}/kernel`);
  if (!kernel || kernel.shape.length !== 2) {
    throw new FormatError(`missing kernel weights for dense layer '${config.name}'`);
  }
  const [nIn, units] = kernel.shape;
  const A: number[][] = [];
  for (let u = 0; u < units; u++) {
    const row = new Array<number>(nIn);
    for (let r = 0; r < nIn; r++) {
      row[r] = kernel.data[r * units + u];
    }
    A.push(row);
  }
  let b: number[];
  if (config.use_bias === false) {
    b = new Array<number>(units).fill(0);
  } else {
    const bias = weights.get(`${config.name}/bias`);
    if (!bias) {
      throw new FormatError(`missing bias weights for dense layer '${config.name}'`);
    }
    b = Array.from(bias.data, Number);
  }
  return { type: "affine", A, b };
}

export function convertSequentialArtifacts(raw: any, baseDir: string): PipelineJson {
  const topo = raw?.modelTopology;
  if (!topo) {
    throw new FormatError("not a TensorFlow.js layers model: missing modelTopology");
  }
  const className = topo.class_name ?? topo.model_config?.class_name;
  const config = topo.config ?? topo.model_config?.config;
  if (className !== "Sequential" || !Array.isArray(config?.layers)) {
    throw new UnsupportedLayerError(`container '${className ?? "unknown"}'`);
  }
  if (!Array.isArray(raw.weightsManifest)) {
    throw new FormatError("model.json has no weightsManifest");
  }
  const weights = loadWeights(raw.weightsManifest, baseDir);

  const layers: PredictorJson[] = [];
  for (const layer of config.layers) {
    switch (layer.class_name) {
      case "InputLayer":
        break;
      case "Dense":
        layers.push(denseToAffine(layer.config, weights));
        pushActivation(layers, layer.config.activation ?? "linear", "Dense");
        break;
      case "Activation":
        pushActivation(layers, layer.config.activation, "Activation");
        break;
      case "ReLU":
        if (layer.config.maxValue != null) {
          throw new UnsupportedLayerError("ReLU with maxValue clipping");
        }
        layers.push({ type: "relu" });
        break;
      case "Softmax":
        layers.push({ type: "softmax" });
        break;
      default:
        throw new UnsupportedLayerError(layer.class_name);
    }
  }
  if (layers.length === 0) {
    throw new FormatError("model contains no exportable layers");
  }
  return { type: "pipeline", layers };
}

export function convertSequentialFile(modelJsonPath: string): PipelineJson {
  let raw: any;
  try {
    raw = JSON.parse(readFileSync(modelJsonPath, "utf8"));
  } catch (e) {
    if (e instanceof SyntaxError) {
      throw new FormatError(`${modelJsonPath} is not valid JSON: ${e.message}`);
    }
    throw e;
  }
  return convertSequentialArtifacts(raw, dirname(modelJsonPath));
}
