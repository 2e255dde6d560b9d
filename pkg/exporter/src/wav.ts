/** RIFF/WAVE reader for the formats speech corpora actually use. */

export interface WavData {
  /** Mono samples in [-1, 1]; channels are averaged. */
  samples: Float64Array;
  sampleRate: number;
}

const FORMAT_PCM = 1;
const FORMAT_IEEE_FLOAT = 3;

/** Decode a WAV buffer: PCM 16/24/32-bit or float32, any channel count. */
export function decodeWav(buffer: Buffer, name = "wav"): WavData {
  if (buffer.length < 44) {
    throw new Error(`${name}: too short to be a WAV file (${buffer.length} bytes)`);
  }
  if (buffer.toString("ascii", 0, 4) !== "RIFF" ||
      buffer.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${name}: not a RIFF/WAVE file`);
  }

  let formatCode = 0;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;

  // Walk the chunk list; chunks are word-aligned.
  let pos = 12;
  while (pos + 8 <= buffer.length) {
    const id = buffer.toString("ascii", pos, pos + 4);
    const size = buffer.readUInt32LE(pos + 4);
    const body = pos + 8;
    if (id === "fmt ") {
      formatCode = buffer.readUInt16LE(body);
      channels = buffer.readUInt16LE(body + 2);
      sampleRate = buffer.readUInt32LE(body + 4);
      bitsPerSample = buffer.readUInt16LE(body + 14);
    } else if (id === "data") {
      data = buffer.subarray(body, Math.min(body + size, buffer.length));
    }
    pos = body + size + (size % 2);
  }

  if (formatCode === 0) throw new Error(`${name}: missing fmt chunk`);
  if (data === null) throw new Error(`${name}: missing data chunk`);
  if (channels < 1) throw new Error(`${name}: fmt declares ${channels} channels`);

  const decode = samplerFor(formatCode, bitsPerSample, name);
  const bytesPerSample = bitsPerSample / 8;
  const frameBytes = bytesPerSample * channels;
  const frames = Math.floor(data.length / frameBytes);
  const samples = new Float64Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) {
      acc += decode(data, i * frameBytes + c * bytesPerSample);
    }
    samples[i] = acc / channels;
  }
  return { samples, sampleRate };
}

function samplerFor(formatCode: number, bits: number, name: string) {
  if (formatCode === FORMAT_IEEE_FLOAT && bits === 32) {
    return (b: Buffer, at: number) => b.readFloatLE(at);
  }
  if (formatCode === FORMAT_PCM) {
    if (bits === 16) return (b: Buffer, at: number) => b.readInt16LE(at) / 32768;
    if (bits === 24) {
      return (b: Buffer, at: number) => {
        const v = b[at] | (b[at + 1] << 8) | (b[at + 2] << 16);
        return (v >= 0x800000 ? v - 0x1000000 : v) / 8388608;
      };
    }
    if (bits === 32) return (b: Buffer, at: number) => b.readInt32LE(at) / 2147483648;
  }
  throw new Error(
    `${name}: unsupported encoding (format ${formatCode}, ${bits}-bit)`);
}
