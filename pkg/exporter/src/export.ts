/** WAV to DIMF export: decode, resample, encode, re-time to 100 Hz. */

import { readFileSync } from "node:fs";

import { EncoderWeights, encode } from "./encoder.js";
import { FeatureTrack, interpolateFrames } from "./track.js";
import { decodeWav } from "./wav.js";
import { resampleTo } from "./resample.js";

/** Target frame rate; at 100 Hz the downstream 20 fps stride is exactly 5. */
export const TARGET_RATE_HZ = 100;

export interface ExportResult {
  track: FeatureTrack;
  /** Rate of the WAV before any resampling, for provenance. */
  sourceSampleRate: number;
  /** Encoder hidden-state rate before re-timing, for provenance. */
  encoderRateHz: number;
}

/**
 * Turn one WAV file into a 100 Hz feature track.
 *
 * The frame count is set by the audio duration alone: a file of N samples
 * at the encoder's rate yields round(N * 100 / rate) frames, so 1.0 s of
 * audio is exactly 100 frames no matter what the encoder's native hidden
 * rate is.
 */
export function exportFeatures(wavPath: string, weights: EncoderWeights,
                               layer: number): ExportResult {
  const wav = decodeWav(readFileSync(wavPath), wavPath);
  const samples = resampleTo(wav.samples, wav.sampleRate, weights.sampleRate);
  const hidden = encode(samples, weights, layer);
  const frames = Math.round(samples.length * TARGET_RATE_HZ / weights.sampleRate);
  const track = interpolateFrames(hidden, Math.max(frames, 1), TARGET_RATE_HZ);
  return {
    track,
    sourceSampleRate: wav.sampleRate,
    encoderRateHz: hidden.frameRateHz,
  };
}
