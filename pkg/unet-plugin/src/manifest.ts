/** Segmenter-protocol manifest parsing and validation. */
import * as fs from "fs";
import { z } from "zod";

const trainParamsSchema = z.object({
  epochs: z.number().int().positive().nullable().optional(),
  learning_rate: z.number().positive().nullable().optional(),
  batch_size: z.number().int().positive().nullable().optional(),
});

export const manifestSchema = z.object({
  task: z.enum(["train", "predict"]),
  channels: z.number().int().min(1),
  patch_size: z.number().int().min(1),
  seed: z.number().int().default(0),
  model_path: z.string(),
  output_dir: z.string(),
  train_patches: z.array(z.string()).default([]),
  train_targets: z.array(z.string()).default([]),
  val_patches: z.array(z.string()).default([]),
  val_targets: z.array(z.string()).default([]),
  predict_patches: z.array(z.string()).default([]),
  predict_outputs: z.array(z.string()).default([]),
  train_params: trainParamsSchema.default({}),
});

export type Manifest = z.infer<typeof manifestSchema>;

export function readManifest(path: string): Manifest {
  const manifest = manifestSchema.parse(JSON.parse(fs.readFileSync(path, "utf-8")));
  if (manifest.task === "train") {
    if (manifest.train_patches.length === 0 || manifest.val_patches.length === 0) {
      throw new Error("train manifest needs train and val patches");
    }
    if (
      manifest.train_patches.length !== manifest.train_targets.length ||
      manifest.val_patches.length !== manifest.val_targets.length
    ) {
      throw new Error("patch/target list lengths disagree");
    }
  } else {
    if (manifest.predict_patches.length !== manifest.predict_outputs.length) {
      throw new Error("predict patch/output list lengths disagree");
    }
  }
  return manifest;
}
