/**
 * Convert serialized ml-cart regression trees and ml-random-forest
 * regression forests into portable predictor JSON.
 *
 * Feature indices, thresholds and leaf values are copied exactly. Forest
 * estimators trained on per-estimator feature selections are remapped back
 * to original column indices through the stored index arrays.
 *
 * Note on ties: ml-cart descends left on x < threshold (strict), the
 * portable schema on x <= threshold. Thresholds are midpoints between
 * distinct training samples, so the conventions only differ on inputs that
 * hit a threshold exactly.
 */

import { readFileSync } from "node:fs";

import {
  DecisionTreeJson,
  FormatError,
  PredictorJson,
  RandomForestJson,
  TreeNodeJson,
  UnsupportedLayerError,
} from "./schema.js";

interface CartNode {
  splitColumn?: number;
  splitValue?: number;
  left?: CartNode;
  right?: CartNode;
  distribution?: unknown;
}

function convertNode(node: CartNode, featureMap: number[] | null): TreeNodeJson {
  if (node.left && node.right) {
    if (typeof node.splitColumn !== "number" || typeof node.splitValue !== "number") {
      throw new FormatError("internal tree node without splitColumn/splitValue");
    }
    const feature = featureMap ? featureMap[node.splitColumn] : node.splitColumn;
    if (feature === undefined) {
      throw new FormatError(`split column ${node.splitColumn} outside the feature index map`);
    }
    return {
      feature,
      threshold: node.splitValue,
      left: convertNode(node.left, featureMap),
      right: convertNode(node.right, featureMap),
    };
  }
  if (typeof node.distribution !== "number") {
    throw new UnsupportedLayerError("classification tree (non-scalar leaf distribution)");
  }
  return { value: node.distribution };
}

function maxFeature(node: TreeNodeJson): number {
  if ("value" in node) {
    return -1;
  }
  return Math.max(node.feature, maxFeature(node.left), maxFeature(node.right));
}

function treeJson(root: TreeNodeJson, nInputs?: number): { n_inputs: number; root: TreeNodeJson } {
  const needed = maxFeature(root) + 1;
  const n = nInputs ?? Math.max(needed, 1);
  if (n < needed) {
    throw new FormatError(`tree tests feature ${needed - 1} but n_inputs=${n} was requested`);
  }
  return { n_inputs: n, root };
}

export function convertTreeModel(raw: any, nInputs?: number): PredictorJson {
  const base = raw?.baseModel;
  if (base && Array.isArray(base.estimators)) {
    if (base.isClassifier) {
      throw new UnsupportedLayerError("classification forest");
    }
    const indexes: number[][] | undefined = base.indexes;
    const roots = base.estimators.map((est: any, i: number) => {
      if (!est?.root) {
        throw new FormatError(`estimator ${i} has no root node`);
      }
      return convertNode(est.root, indexes ? indexes[i] : null);
    });
    const n =
      nInputs ?? Math.max(1, ...roots.map((r: TreeNodeJson) => maxFeature(r) + 1));
    const forest: RandomForestJson = {
      type: "random_forest",
      trees: roots.map((root: TreeNodeJson) => treeJson(root, n)),
    };
    return forest;
  }
  if (raw?.root) {
    if (raw.options?.kind && raw.options.kind !== "regression") {
      throw new UnsupportedLayerError(`${raw.options.kind} tree`);
    }
    const tree: DecisionTreeJson = {
      type: "decision_tree",
      ...treeJson(convertNode(raw.root, null), nInputs),
    };
    return tree;
  }
  throw new FormatError("unrecognized tree model JSON (expected ml-cart or ml-random-forest)");
}

export function convertTreeFile(path: string, nInputs?: number): PredictorJson {
  let raw: any;
  try {
    raw = JSON.parse(readFileSync(path, "utf8"));
  } catch (e) {
    if (e instanceof SyntaxError) {
      throw new FormatError(`${path} is not valid JSON: ${e.message}`);
    }
    throw e;
  }
  return convertTreeModel(raw, nInputs);
}
