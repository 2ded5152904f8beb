import { createHash } from "node:crypto";

import { ObserveMessage, ProtocolViolation } from "./protocol.js";

export interface DecodedImage {
  data: Uint8Array; // row-major RGB bytes, length = width * height * 3
  width: number;
  height: number;
}

/** Decode the observation's base64 RGB payload into raw bytes. */
export function decodeImage(msg: ObserveMessage): DecodedImage {
  const data = new Uint8Array(Buffer.from(msg.rgb_b64, "base64"));
  const expected = msg.width * msg.height * 3;
  if (data.length !== expected) {
    throw new ProtocolViolation(
      `rgb buffer is ${data.length} bytes, expected ${expected} (${msg.width}x${msg.height}x3)`,
    );
  }
  return { data, width: msg.width, height: msg.height };
}

/** View as a nested (height, width, 3) array of numbers. */
export function toNested(img: DecodedImage): number[][][] {
  const out: number[][][] = [];
  let i = 0;
  for (let y = 0; y < img.height; y++) {
    const row: number[][] = [];
    for (let x = 0; x < img.width; x++) {
      row.push([img.data[i], img.data[i + 1], img.data[i + 2]]);
      i += 3;
    }
    out.push(row);
  }
  return out;
}

export function sha256Hex(data: Uint8Array): string {
  return createHash("sha256").update(data).digest("hex");
}
