export { decodeWav, WavData } from "./wav.js";
export { resampleTo } from "./resample.js";
export { FeatureTrack, interpolateFrames, makeTrack } from "./track.js";
export { EncoderWeights, encode, layerCount, loadWeights } from "./encoder.js";
export { encodeDimf, readDimf, writeDimf } from "./dimf.js";
export { ExportResult, TARGET_RATE_HZ, exportFeatures } from "./export.js";
export { ManifestRow, manifestCsv, writeManifest } from "./manifest.js";
