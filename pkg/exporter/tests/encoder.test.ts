import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { encode, layerCount, loadWeights } from "../src/encoder.js";
import { testSignal } from "./helpers.js";

const WEIGHTS = fileURLToPath(
  new URL("../weights/tiny-encoder.json", import.meta.url));

describe("encoder", () => {
  const weights = loadWeights(WEIGHTS);

  it("bundles a front end plus two refinement layers", () => {
    expect(layerCount(weights)).toBe(3);
    expect(weights.channels).toBe(80);
    expect(weights.sampleRate).toBe(16000);
  });

  it("emits 50 Hz hidden states", () => {
    const samples = Float64Array.from(testSignal(1.0, 16000));
    const track = encode(samples, weights, 0);
    expect(track.frames).toBe(50);
    expect(track.channels).toBe(80);
    expect(track.frameRateHz).toBe(50);
  });

  it("is deterministic for identical audio", () => {
    const samples = Float64Array.from(testSignal(0.5, 16000));
    const a = encode(samples, weights, 2);
    const b = encode(samples, weights, 2);
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
  });

  it("differs between layers", () => {
    const samples = Float64Array.from(testSignal(0.5, 16000));
    const h0 = encode(samples, weights, 0);
    const h2 = encode(samples, weights, 2);
    expect(Array.from(h0.data)).not.toEqual(Array.from(h2.data));
  });

  it("keeps every value finite and bounded by the activation", () => {
    const samples = Float64Array.from(testSignal(0.3, 16000, 7));
    const track = encode(samples, weights, 2);
    for (const v of track.data) {
      expect(Number.isFinite(v)).toBe(true);
      expect(Math.abs(v)).toBeLessThanOrEqual(1.0);
    }
  });

  it("rejects out-of-range layers", () => {
    const samples = Float64Array.from(testSignal(0.2, 16000));
    expect(() => encode(samples, weights, 3)).toThrow(/layers 0\.\.2/);
    expect(() => encode(samples, weights, -1)).toThrow(/out of range/);
  });

  it("rejects audio shorter than the front-end kernel", () => {
    expect(() => encode(new Float64Array(100), weights, 0)).toThrow(/too short/);
  });

  it("aborts when the weight bundle is missing", () => {
    expect(() => loadWeights("/nonexistent/w.json")).toThrow(/weights not found/);
  });
});
