#!/usr/bin/env node
/**
 * export-predictor <in> <out> [--kind sequential|tree] [--n-inputs N]
 *
 * Converts a trained model file into portable predictor JSON. Exit codes
 * mirror the optembed CLI: 0 success, 1 conversion/domain error, 2 usage.
 */

import { writeFileSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { FormatError, UnsupportedLayerError } from "./schema.js";
import { convertSequentialFile } from "./sequential.js";
import { convertTreeFile } from "./tree.js";

export function runExport(
  input: string,
  output: string,
  kind: "sequential" | "tree",
  nInputs?: number,
): void {
  const predictor =
    kind === "sequential" ? convertSequentialFile(input) : convertTreeFile(input, nInputs);
  writeFileSync(output, JSON.stringify(predictor));
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  const parser = yargs(argv)
    .scriptName("export-predictor")
    .command("$0 <input> <output>", "convert a trained model to predictor JSON", (y) =>
      y
        .positional("input", { type: "string", demandOption: true })
        .positional("output", { type: "string", demandOption: true })
        .option("kind", {
          choices: ["sequential", "tree"] as const,
          default: "sequential" as const,
          describe: "sequential: TensorFlow.js layers model; tree: ml-cart / ml-random-forest",
        })
        .option("n-inputs", {
          type: "number",
          describe: "declared input count for tree models (default: inferred)",
        }),
    )
    .strict()
    .fail((msg, err) => {
      if (err) throw err;
      throw new UsageError(msg);
    })
    .exitProcess(false);

  let args;
  try {
    args = parser.parseSync();
  } catch (e) {
    if (e instanceof UsageError) {
      process.stderr.write(`usage error: ${e.message}\n`);
      return 2;
    }
    throw e;
  }
  try {
    runExport(
      args.input as string,
      args.output as string,
      args.kind as "sequential" | "tree",
      args["n-inputs"] as number | undefined,
    );
    return 0;
  } catch (e) {
    if (e instanceof UnsupportedLayerError || e instanceof FormatError) {
      process.stderr.write(`error: ${e.message}\n`);
    } else if ((e as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: ${(e as Error).message}\n`);
    } else {
      throw e;
    }
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(hideBin(process.argv)));
}
