/** WAV encoders for building test fixtures in memory. */

function riff(fmtBody: Buffer, data: Buffer): Buffer {
  const header = Buffer.alloc(12);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(4 + 8 + fmtBody.length + 8 + data.length, 4);
  header.write("WAVE", 8, "ascii");
  const fmtHead = Buffer.alloc(8);
  fmtHead.write("fmt ", 0, "ascii");
  fmtHead.writeUInt32LE(fmtBody.length, 4);
  const dataHead = Buffer.alloc(8);
  dataHead.write("data", 0, "ascii");
  dataHead.writeUInt32LE(data.length, 4);
  return Buffer.concat([header, fmtHead, fmtBody, dataHead, data]);
}

function fmtChunk(formatCode: number, channels: number, rate: number,
                  bits: number): Buffer {
  const body = Buffer.alloc(16);
  body.writeUInt16LE(formatCode, 0);
  body.writeUInt16LE(channels, 2);
  body.writeUInt32LE(rate, 4);
  body.writeUInt32LE(rate * channels * (bits / 8), 8);
  body.writeUInt16LE(channels * (bits / 8), 12);
  body.writeUInt16LE(bits, 14);
  return body;
}

/** Interleaved channels: samples[frame][channel] or mono number[]. */
export function wavPcm16(samples: number[] | number[][], rate: number): Buffer {
  const frames = toFrames(samples);
  const channels = frames[0].length;
  const data = Buffer.alloc(frames.length * channels * 2);
  frames.flat().forEach((v, i) => {
    data.writeInt16LE(Math.max(-32768, Math.min(32767, Math.round(v * 32768))), i * 2);
  });
  return riff(fmtChunk(1, channels, rate, 16), data);
}

export function wavFloat32(samples: number[] | number[][], rate: number): Buffer {
  const frames = toFrames(samples);
  const channels = frames[0].length;
  const data = Buffer.alloc(frames.length * channels * 4);
  frames.flat().forEach((v, i) => data.writeFloatLE(v, i * 4));
  return riff(fmtChunk(3, channels, rate, 32), data);
}

function toFrames(samples: number[] | number[][]): number[][] {
  return samples.map((s) => (Array.isArray(s) ? s : [s]));
}

/** Deterministic pseudo-audio: clicks over a small noise floor. */
export function testSignal(seconds: number, rate: number, seed = 1): number[] {
  let state = seed >>> 0;
  const next = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 4294967296 - 0.5;
  };
  const n = Math.round(seconds * rate);
  const out = new Array<number>(n);
  for (let i = 0; i < n; i++) {
    out[i] = next() * 0.1 + (i % rate === 0 ? 0.8 : 0);
  }
  return out;
}
