/** Minimal .npz writer for float64 arrays (mask-classification outputs). */

import { writeFileSync } from "node:fs";
import { zipSync } from "fflate";

function npyBytes(data: Float64Array, shape: number[]): Uint8Array {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${shape}] does not match ${data.length} elements`);
  }
  const dict = `{'descr': '<f8', 'fortran_order': False, 'shape': (${shape.join(", ")}${
    shape.length === 1 ? "," : ""
  }), }`;
  // total header (magic + version + length field + dict + padding) is a
  // multiple of 64 bytes, newline-terminated, per the npy v1.0 format
  const base = 10 + dict.length + 1;
  const padded = Math.ceil(base / 64) * 64;
  const header = dict + " ".repeat(padded - base) + "\n";

  const out = new Uint8Array(padded + data.length * 8);
  out.set([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59, 1, 0]); // \x93NUMPY v1.0
  const view = new DataView(out.buffer);
  view.setUint16(8, header.length, true);
  for (let i = 0; i < header.length; i++) out[10 + i] = header.charCodeAt(i);
  new Uint8Array(out.buffer, padded).set(new Uint8Array(data.buffer, data.byteOffset, data.length * 8));
  return out;
}

export function writeNpz(
  path: string,
  entries: Record<string, { data: Float64Array; shape: number[] }>,
): void {
  const files: Record<string, Uint8Array> = {};
  for (const [name, arr] of Object.entries(entries)) {
    files[`${name}.npy`] = npyBytes(arr.data, arr.shape);
  }
  writeFileSync(path, zipSync(files, { level: 0 }));
}
