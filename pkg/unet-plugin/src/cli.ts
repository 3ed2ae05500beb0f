#!/usr/bin/env node
/**
 * Segmenter-protocol CLI:
 *
 *   unet-plugin [--filter-scale N] train   --manifest m.json
 *   unet-plugin predict --manifest m.json
 *   unet-plugin [--filter-scale N] inspect [--channels C] [--patch-size P]
 *
 * Exit code 0 on success; nonzero with a message on stderr for any
 * protocol or shape violation.  --filter-scale divides every filter count
 * (1 = the full published configuration) and is recorded in the model
 * file, so predict always matches the trained architecture.
 */
import { readManifest } from "./manifest";
import { runPredict, runTrain } from "./train";
import { describeArchitecture, layerSpecs, PATCH_SIZE } from "./unet";

interface Args {
  task: string;
  manifest?: string;
  filterScale: number;
  channels: number;
  patchSize: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    task: "",
    filterScale: 1,
    channels: 6,
    patchSize: PATCH_SIZE,
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--filter-scale") args.filterScale = Number(argv[++i]);
    else if (a === "--manifest") args.manifest = argv[++i];
    else if (a === "--channels") args.channels = Number(argv[++i]);
    else if (a === "--patch-size") args.patchSize = Number(argv[++i]);
    else if (!a.startsWith("--") && !args.task) args.task = a;
    else throw new Error(`unknown argument ${a}`);
  }
  if (!["train", "predict", "inspect"].includes(args.task)) {
    throw new Error(`task must be train, predict or inspect, got '${args.task}'`);
  }
  if (!Number.isFinite(args.filterScale) || args.filterScale < 1) {
    throw new Error(`--filter-scale must be a number >= 1`);
  }
  return args;
}

function main(): number {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(`unet-plugin: ${(err as Error).message}\n`);
    return 2;
  }
  try {
    if (args.task === "inspect") {
      const arch = {
        ...describeArchitecture(args.channels, args.patchSize),
        filterScale: args.filterScale,
        parameterCount: layerSpecs({
          channels: args.channels,
          patchSize: args.patchSize,
          filterScale: args.filterScale,
        }).reduce((acc, s) => acc + s.shape.reduce((a, b) => a * b, 1), 0),
      };
      process.stdout.write(JSON.stringify(arch, null, 2) + "\n");
      return 0;
    }
    if (!args.manifest) {
      process.stderr.write("unet-plugin: --manifest is required\n");
      return 2;
    }
    const manifest = readManifest(args.manifest);
    if (manifest.task !== args.task) {
      process.stderr.write(
        `unet-plugin: manifest task ${manifest.task} != subcommand ${args.task}\n`
      );
      return 2;
    }
    if (args.task === "train") runTrain(manifest, args.filterScale);
    else runPredict(manifest);
    return 0;
  } catch (err) {
    process.stderr.write(`unet-plugin: ${(err as Error).message}\n`);
    return 1;
  }
}

process.exit(main());
