/** Pretrained speech encoder: a small convolutional stack with fixed,
 * locally stored weights. Weights are never trained here; they are loaded
 * from a bundle file and applied as-is, so identical audio always yields
 * identical features.
 */

import { readFileSync } from "node:fs";

import { FeatureTrack, makeTrack } from "./track.js";

export interface EncoderWeights {
  version: number;
  sampleRate: number;
  channels: number;
  /** Waveform front end: kernel == stride, so frameRate = sampleRate / stride. */
  frontend: { kernel: number; stride: number; weight: Float32Array; bias: Float32Array };
  /** Same-padded refinement convolutions over the 50 Hz hidden states. */
  layers: { kernel: number; weight: Float32Array; bias: Float32Array }[];
}

function floats(value: unknown, name: string): Float32Array {
  if (typeof value !== "string") throw new Error(`weights: ${name} must be base64`);
  const buf = Buffer.from(value, "base64");
  return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
}

/** Load an encoder weight bundle; a missing or malformed file is fatal. */
export function loadWeights(path: string): EncoderWeights {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch {
    throw new Error(`encoder weights not found: ${path}`);
  }
  const raw = JSON.parse(text);
  if (raw.version !== 1) {
    throw new Error(`weights: unsupported version ${raw.version}`);
  }
  const frontend = {
    kernel: raw.frontend.kernel as number,
    stride: raw.frontend.stride as number,
    weight: floats(raw.frontend.weight, "frontend.weight"),
    bias: floats(raw.frontend.bias, "frontend.bias"),
  };
  if (frontend.weight.length !== raw.channels * frontend.kernel) {
    throw new Error("weights: frontend.weight size does not match its shape");
  }
  const layers = (raw.layers as any[]).map((layer, i) => {
    const weight = floats(layer.weight, `layers[${i}].weight`);
    if (weight.length !== raw.channels * raw.channels * layer.kernel) {
      throw new Error(`weights: layers[${i}].weight size does not match its shape`);
    }
    return { kernel: layer.kernel as number, weight, bias: floats(layer.bias, `layers[${i}].bias`) };
  });
  return {
    version: 1,
    sampleRate: raw.sampleRate,
    channels: raw.channels,
    frontend,
    layers,
  };
}

/** Number of hidden-state layers the bundle exposes (front end + refinements). */
export function layerCount(weights: EncoderWeights): number {
  return 1 + weights.layers.length;
}

/**
 * Run the encoder and return the hidden states of one layer.
 *
 * Layer 0 is the waveform front end output; layer i > 0 is the output of
 * the i-th refinement convolution. The track's native frame rate is
 * sampleRate / stride (50 Hz with the bundled weights).
 */
export function encode(samples: Float64Array, weights: EncoderWeights,
                       layer: number): FeatureTrack {
  const count = layerCount(weights);
  if (!Number.isInteger(layer) || layer < 0 || layer >= count) {
    throw new Error(`layer ${layer} out of range (bundle has layers 0..${count - 1})`);
  }
  const { kernel, stride, weight, bias } = weights.frontend;
  const ch = weights.channels;
  const frames = Math.floor((samples.length - kernel) / stride) + 1;
  if (frames < 1) {
    throw new Error(
      `audio too short for the encoder (${samples.length} samples < kernel ${kernel})`);
  }
  let track = makeTrack(frames, ch, weights.sampleRate / stride);
  for (let t = 0; t < frames; t++) {
    const start = t * stride;
    for (let c = 0; c < ch; c++) {
      let acc = bias[c];
      const wOff = c * kernel;
      for (let k = 0; k < kernel; k++) {
        acc += weight[wOff + k] * samples[start + k];
      }
      track.data[t * ch + c] = Math.tanh(acc);
    }
  }
  for (let i = 0; i < layer; i++) {
    track = refine(track, weights.layers[i]);
  }
  return track;
}

function refine(track: FeatureTrack,
                layer: { kernel: number; weight: Float32Array; bias: Float32Array }): FeatureTrack {
  const ch = track.channels;
  const half = (layer.kernel - 1) / 2;
  const out = makeTrack(track.frames, ch, track.frameRateHz);
  for (let t = 0; t < track.frames; t++) {
    for (let c = 0; c < ch; c++) {
      let acc = layer.bias[c];
      for (let k = 0; k < layer.kernel; k++) {
        const src = t + k - half;
        if (src < 0 || src >= track.frames) continue; // zero padding
        for (let d = 0; d < ch; d++) {
          acc += layer.weight[(c * ch + d) * layer.kernel + k] *
            track.data[src * ch + d];
        }
      }
      out.data[t * ch + c] = Math.tanh(acc);
    }
  }
  return out;
}
