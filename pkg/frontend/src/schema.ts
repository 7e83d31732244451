/** Portable predictor JSON, as consumed by the optembed service and CLI. */

export interface AffineJson {
  type: "affine";
  A: number[][];
  b: number[];
}

export interface ActivationJson {
  type: "relu" | "sigmoid" | "tanh" | "softmax";
}

export interface SoftplusJson {
  type: "softplus";
  beta?: number;
}

export interface PipelineJson {
  type: "pipeline";
  layers: PredictorJson[];
}

export interface TreeSplitJson {
  feature: number;
  threshold: number;
  left: TreeNodeJson;
  right: TreeNodeJson;
}

export interface TreeLeafJson {
  value: number;
}

export type TreeNodeJson = TreeSplitJson | TreeLeafJson;

export interface DecisionTreeJson {
  type: "decision_tree";
  n_inputs: number;
  root: TreeNodeJson;
}

export interface RandomForestJson {
  type: "random_forest";
  trees: { n_inputs: number; root: TreeNodeJson }[];
}

export type PredictorJson =
  | AffineJson
  | ActivationJson
  | SoftplusJson
  | PipelineJson
  | DecisionTreeJson
  | RandomForestJson;

/** Input model file does not look like the expected framework format. */
export class FormatError extends Error {}

/** The model contains a layer kind the exporter cannot express. */
export class UnsupportedLayerError extends Error {
  constructor(layer: string) {
    super(`unsupported layer: ${layer}`);
  }
}
