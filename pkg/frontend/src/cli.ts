#!/usr/bin/env node
/** plot trajectory|rates|timelapse --in DIR[,DIR...] --out FILE */

import { writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { MissingArtifactError } from "./data.js";
import { plotRateCurve } from "./rates.js";
import { plotTimelapse } from "./timelapse.js";
import { plotTrajectory } from "./trajectory.js";

export function run(argv: string[]): number {
  const args = yargs(argv)
    .command("trajectory", "overlay trajectories from one or more result dirs")
    .command("rates", "rate curve from a sweep directory or sweep.csv")
    .command("timelapse", "per-slot panels from an online result dir")
    .option("in", { type: "string", demandOption: true,
                    describe: "result dir(s), comma separated" })
    .option("out", { type: "string", demandOption: true,
                     describe: "output .svg path" })
    .demandCommand(1)
    .strict()
    .exitProcess(false)
    .parseSync();

  const command = String(args._[0]);
  const inputs = String(args.in).split(",").map((s) => s.trim()).filter(Boolean);
  try {
    let svg: string;
    if (command === "trajectory") {
      svg = plotTrajectory(inputs);
    } else if (command === "rates") {
      const path = inputs[0].endsWith(".csv") ? inputs[0] : `${inputs[0]}/sweep.csv`;
      svg = plotRateCurve(path);
    } else if (command === "timelapse") {
      svg = plotTimelapse(inputs[0]);
    } else {
      console.error(`unknown command: ${command}`);
      return 2;
    }
    writeFileSync(String(args.out), svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof MissingArtifactError) {
      console.error(String(err.message));
      return 1;
    }
    throw err;
  }
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(run(hideBin(process.argv)));
}
