/** Sample-rate conversion by linear interpolation. */

/**
 * Resample a waveform to a new rate.
 *
 * Output length is round(n * dstRate / srcRate) so one second stays one
 * second. Endpoints clamp, so no index ever reads past the input.
 */
export function resampleTo(samples: Float64Array, srcRate: number,
                           dstRate: number): Float64Array {
  if (srcRate <= 0 || dstRate <= 0) {
    throw new Error(`sample rates must be positive (${srcRate} -> ${dstRate})`);
  }
  if (srcRate === dstRate) return samples.slice();
  const outLen = Math.round(samples.length * dstRate / srcRate);
  const out = new Float64Array(outLen);
  const step = srcRate / dstRate;
  const last = samples.length - 1;
  for (let i = 0; i < outLen; i++) {
    const pos = Math.min(i * step, last);
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, last);
    const frac = pos - lo;
    out[i] = samples[lo] * (1 - frac) + samples[hi] * frac;
  }
  return out;
}
