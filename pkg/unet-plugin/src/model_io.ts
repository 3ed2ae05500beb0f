/**
 * Model checkpoint: "SGU1" | u32 JSON header length | JSON header |
 * concatenated little-endian float32 parameter payloads, header order.
 */
import * as fs from "fs";

import { ParamSet, UNetConfig, layerSpecs } from "./unet";

const MAGIC = "SGU1";

interface Header {
  version: number;
  config: UNetConfig;
  names: string[];
  lengths: number[];
}

export function saveModel(path: string, config: UNetConfig, params: ParamSet): void {
  const names = layerSpecs(config).map((s) => s.name);
  const header: Header = {
    version: 1,
    config,
    names,
    lengths: names.map((n) => params[n].length),
  };
  const headerJson = Buffer.from(JSON.stringify(header), "utf-8");
  const fixed = Buffer.alloc(8);
  fixed.write(MAGIC, 0, "latin1");
  fixed.writeUInt32LE(headerJson.length, 4);
  const blobs = names.map((n) => {
    const arr = params[n];
    const f32 = arr instanceof Float32Array ? arr : Float32Array.from(arr);
    return Buffer.from(f32.buffer, f32.byteOffset, f32.byteLength);
  });
  fs.writeFileSync(path, Buffer.concat([fixed, headerJson, ...blobs]));
}

export function loadModel(path: string): { config: UNetConfig; params: ParamSet } {
  const buf = fs.readFileSync(path);
  if (buf.length < 8 || buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: not a U-Net checkpoint`);
  }
  const headerLen = buf.readUInt32LE(4);
  const header: Header = JSON.parse(buf.toString("utf-8", 8, 8 + headerLen));
  let offset = 8 + headerLen;
  const params: ParamSet = {};
  header.names.forEach((name, i) => {
    const len = header.lengths[i];
    const bytes = new Uint8Array(len * 4);
    buf.copy(bytes, 0, offset, offset + len * 4);
    params[name] = new Float32Array(bytes.buffer);
    offset += len * 4;
  });
  if (offset !== buf.length) {
    throw new Error(`${path}: ${buf.length - offset} trailing bytes`);
  }
  return { config: header.config, params };
}
