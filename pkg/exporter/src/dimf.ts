/** DIMF interchange files: the feature format the gesture model consumes.
 *
 * Layout, all little endian: magic "DIMF", uint32 version (1), uint32 frame
 * count, uint32 channel count, float32 frame rate in Hz, then frames x
 * channels float32 values, row major.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { FeatureTrack } from "./track.js";

const MAGIC = "DIMF";
const VERSION = 1;
const HEADER_BYTES = 20;

export function encodeDimf(track: FeatureTrack): Buffer {
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(track.frames, 8);
  header.writeUInt32LE(track.channels, 12);
  header.writeFloatLE(track.frameRateHz, 16);
  const payload = Buffer.alloc(track.data.length * 4);
  for (let i = 0; i < track.data.length; i++) {
    payload.writeFloatLE(track.data[i], i * 4);
  }
  return Buffer.concat([header, payload]);
}

export function writeDimf(path: string, track: FeatureTrack): void {
  writeFileSync(path, encodeDimf(track));
}

export function readDimf(path: string): FeatureTrack {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES) {
    throw new Error(`${path}: truncated header (${buf.length} bytes)`);
  }
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const frames = buf.readUInt32LE(8);
  const channels = buf.readUInt32LE(12);
  const frameRateHz = buf.readFloatLE(16);
  const expect = frames * channels * 4;
  if (buf.length - HEADER_BYTES !== expect) {
    throw new Error(
      `${path}: payload is ${buf.length - HEADER_BYTES} bytes, header implies ${expect}`);
  }
  const data = new Float32Array(frames * channels);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  }
  return { data, frames, channels, frameRateHz };
}
