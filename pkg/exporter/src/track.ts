/** Feature tracks: time-major float32 matrices with a frame rate. */

export interface FeatureTrack {
  /** Row-major (frames x channels). */
  data: Float32Array;
  frames: number;
  channels: number;
  frameRateHz: number;
}

export function makeTrack(frames: number, channels: number,
                          frameRateHz: number): FeatureTrack {
  return { data: new Float32Array(frames * channels), frames, channels, frameRateHz };
}

/**
 * Linearly interpolate a track to a new frame count.
 *
 * Endpoints align: output frame 0 equals input frame 0 and the last output
 * frame equals the last input frame, so re-timing never extrapolates.
 */
export function interpolateFrames(track: FeatureTrack, frames: number,
                                  frameRateHz: number): FeatureTrack {
  if (frames < 1) throw new Error(`target frame count must be >= 1, got ${frames}`);
  const out = makeTrack(frames, track.channels, frameRateHz);
  if (track.frames === 1) {
    for (let i = 0; i < frames; i++) {
      out.data.set(track.data.subarray(0, track.channels), i * track.channels);
    }
    return out;
  }
  const step = frames === 1 ? 0 : (track.frames - 1) / (frames - 1);
  for (let i = 0; i < frames; i++) {
    const pos = i * step;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, track.frames - 1);
    const frac = pos - lo;
    for (let c = 0; c < track.channels; c++) {
      const a = track.data[lo * track.channels + c];
      const b = track.data[hi * track.channels + c];
      out.data[i * track.channels + c] = a * (1 - frac) + b * frac;
    }
  }
  return out;
}
