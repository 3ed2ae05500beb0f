/**
 * "SGT1" portable tensor files: the raster interchange format of the
 * segmenter protocol.
 *
 *   magic "SGT1" | u8 dtype (0=f32, 1=u32, 2=u8) | u8 ndim |
 *   ndim x u32 little-endian dims | raw little-endian payload
 */
import * as fs from "fs";

export type SgtArray = Float32Array | Uint32Array | Uint8Array;

export interface SgtTensor {
  data: SgtArray;
  shape: number[];
}

const MAGIC = "SGT1";

export function readSgt(path: string): SgtTensor {
  const buf = fs.readFileSync(path);
  if (buf.length < 6) throw new Error(`${path}: truncated header`);
  if (buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic, not an SGT1 tensor file`);
  }
  const dtype = buf.readUInt8(4);
  const ndim = buf.readUInt8(5);
  const headerEnd = 6 + 4 * ndim;
  if (buf.length < headerEnd) throw new Error(`${path}: truncated dims`);
  const shape: number[] = [];
  let n = 1;
  for (let i = 0; i < ndim; i++) {
    const d = buf.readUInt32LE(6 + 4 * i);
    shape.push(d);
    n *= d;
  }
  const itemSize = dtype === 2 ? 1 : 4;
  if (buf.length !== headerEnd + n * itemSize) {
    throw new Error(
      `${path}: payload is ${buf.length - headerEnd} bytes, expected ${n * itemSize}`
    );
  }
  // copy into an aligned buffer; Buffer slices may be misaligned for f32 views
  const payload = new Uint8Array(n * itemSize);
  buf.copy(payload, 0, headerEnd);
  let data: SgtArray;
  if (dtype === 0) data = new Float32Array(payload.buffer);
  else if (dtype === 1) data = new Uint32Array(payload.buffer);
  else if (dtype === 2) data = payload;
  else throw new Error(`${path}: unknown dtype code ${dtype}`);
  return { data, shape };
}

export function writeSgt(path: string, tensor: SgtTensor): void {
  const { data, shape } = tensor;
  let dtype: number;
  if (data instanceof Float32Array) dtype = 0;
  else if (data instanceof Uint32Array) dtype = 1;
  else dtype = 2;
  const n = shape.reduce((a, b) => a * b, 1);
  if (n !== data.length) {
    throw new Error(`shape ${shape} does not match data length ${data.length}`);
  }
  const header = Buffer.alloc(6 + 4 * shape.length);
  header.write(MAGIC, 0, "latin1");
  header.writeUInt8(dtype, 4);
  header.writeUInt8(shape.length, 5);
  shape.forEach((d, i) => header.writeUInt32LE(d, 6 + 4 * i));
  fs.writeFileSync(path, Buffer.concat([header, Buffer.from(data.buffer, data.byteOffset, data.byteLength)]));
}
