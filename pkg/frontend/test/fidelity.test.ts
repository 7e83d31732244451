/**
 * End-to-end fidelity: exported predictors are evaluated by the optembed
 * service and must agree with the training framework's forward pass.
 * Requires the primary package installed (`python3 -m optembed serve`).
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import * as tf from "@tensorflow/tfjs";
import { DecisionTreeRegression } from "ml-cart";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { PredictorJson } from "../src/schema";
import { convertSequentialFile } from "../src/sequential";
import { convertTreeModel } from "../src/tree";
import { lcg, randomSequential, saveModelToDir } from "./artifacts";

const PORT = 8930 + (process.pid % 50);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

beforeAll(async () => {
  tf.setBackend("cpu");
  service = spawn("python3", ["-m", "optembed", "serve", "--port", String(PORT)], {
    stdio: "ignore",
  });
  for (let i = 0; i < 150; i++) {
    try {
      const r = await fetch(`${BASE}/health`);
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("optembed service did not come up");
});

afterAll(() => {
  service?.kill();
});

async function servicePredict(predictor: PredictorJson, x: number[]): Promise<number[]> {
  const r = await fetch(`${BASE}/predict`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ predictor, x }),
  });
  if (!r.ok) {
    throw new Error(`predict failed: ${r.status} ${await r.text()}`);
  }
  return (await r.json()).y;
}

describe("exporter fidelity through the service", () => {
  it("20 random sequential models agree within 1e-6", async () => {
    const rand = lcg(987654321);
    for (let m = 0; m < 20; m++) {
      const { model, nIn } = randomSequential(rand);
      const path = await saveModelToDir(model, mkdtempSync(join(tmpdir(), "fid-")));
      const exported = convertSequentialFile(path);
      for (let k = 0; k < 5; k++) {
        const x = Array.from({ length: nIn }, () => Math.fround(rand()));
        const expected = (await (model.predict(tf.tensor2d([x])) as tf.Tensor).data()) as Float32Array;
        const got = await servicePredict(exported, x);
        expect(got).toHaveLength(expected.length);
        for (let i = 0; i < got.length; i++) {
          expect(Math.abs(got[i] - expected[i])).toBeLessThanOrEqual(1e-6);
        }
      }
      model.dispose();
    }
  });

  it("the 10-16-relu-2 export reports dims 10 -> 2", async () => {
    const model = tf.sequential();
    model.add(tf.layers.dense({ units: 16, inputShape: [10], activation: "relu" }));
    model.add(tf.layers.dense({ units: 2 }));
    const path = await saveModelToDir(model, mkdtempSync(join(tmpdir(), "fid-")));
    const exported = convertSequentialFile(path);
    const r = await fetch(`${BASE}/dims`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ predictor: exported }),
    });
    expect(await r.json()).toEqual({ n_in: 10, n_out: 2 });
    model.dispose();
  });

  it("truth-function tree matches the reference on the grid via the service", async () => {
    const truth = (x: number[]) => (x[0] <= 0.5 ? -2 : x[1] <= 0.3 ? 3 : 4);
    const X: number[][] = [];
    const y: number[] = [];
    for (let i = 0; i <= 20; i++) {
      for (let j = 0; j <= 20; j++) {
        X.push([i / 20, j / 20]);
        y.push(truth([i / 20, j / 20]));
      }
    }
    const dt = new DecisionTreeRegression({ maxDepth: 12, minNumSamples: 1, gainThreshold: -1e-9 });
    dt.train(X, y);
    const exported = convertTreeModel(dt.toJSON(), 2);
    for (let i = 0; i <= 20; i += 2) {
      for (let j = 0; j <= 20; j += 2) {
        const x = [i / 20, j / 20];
        const got = await servicePredict(exported, x);
        expect(got).toEqual([truth(x)]);
      }
    }
  });
});
