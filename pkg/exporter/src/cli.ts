#!/usr/bin/env node
/** Command line entry point for batch feature export. */

import { mkdirSync, readdirSync } from "node:fs";
import { basename, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { Command } from "commander";

import { exportFeatures } from "./export.js";
import { layerCount, loadWeights } from "./encoder.js";
import { writeDimf } from "./dimf.js";
import { ManifestRow, writeManifest } from "./manifest.js";

const DEFAULT_WEIGHTS = fileURLToPath(
  new URL("../weights/tiny-encoder.json", import.meta.url));

const program = new Command();
program
  .name("dimf-export")
  .description("Run a pretrained speech encoder over WAV files and write " +
    "DIMF feature files.");

program
  .command("export")
  .description("Export one WAV (--wav/--out) or a directory (--wav-dir/--out-dir).")
  .option("--wav <file>", "single input WAV")
  .option("--out <file>", "single output DIMF path")
  .option("--wav-dir <dir>", "directory of input WAVs")
  .option("--out-dir <dir>", "directory for output DIMFs")
  .option("--manifest <csv>", "manifest path (default: <out-dir>/manifest.csv)")
  .option("--layer <int>", "encoder hidden layer (default: last)", parseIntArg)
  .option("--weights <path>", "encoder weight bundle", DEFAULT_WEIGHTS)
  .action(runExport);

function parseIntArg(value: string): number {
  const n = Number(value);
  if (!Number.isInteger(n)) {
    fail(`--layer must be an integer, got '${value}'`);
  }
  return n;
}

function fail(message: string): never {
  console.error(`error: ${message}`);
  process.exit(1);
}

interface ExportOptions {
  wav?: string;
  out?: string;
  wavDir?: string;
  outDir?: string;
  manifest?: string;
  layer?: number;
  weights: string;
}

function runExport(opts: ExportOptions): void {
  const single = opts.wav !== undefined;
  const batch = opts.wavDir !== undefined;
  if (single === batch) {
    fail("pass either --wav or --wav-dir (not both)");
  }
  if (single && opts.out === undefined) fail("--wav requires --out");
  if (batch && opts.outDir === undefined) fail("--wav-dir requires --out-dir");

  let weights;
  try {
    weights = loadWeights(opts.weights);
  } catch (err) {
    fail(String(err instanceof Error ? err.message : err));
  }
  const layer = opts.layer ?? layerCount(weights) - 1;

  if (single) {
    try {
      writeExport(opts.wav!, opts.out!, weights, layer);
    } catch (err) {
      fail(String(err instanceof Error ? err.message : err));
    }
    return;
  }

  const outDir = resolve(opts.outDir!);
  mkdirSync(outDir, { recursive: true });
  const names = readdirSync(opts.wavDir!)
    .filter((n) => n.toLowerCase().endsWith(".wav"))
    .sort();
  if (names.length === 0) fail(`no .wav files in ${opts.wavDir}`);

  const rows: ManifestRow[] = [];
  let skipped = 0;
  for (const name of names) {
    const wavPath = join(opts.wavDir!, name);
    const dimfPath = join(outDir, basename(name).replace(/\.wav$/i, ".dimf"));
    try {
      rows.push(writeExport(wavPath, dimfPath, weights, layer));
    } catch (err) {
      console.error(`skip: ${wavPath}: ${err instanceof Error ? err.message : err}`);
      skipped += 1;
    }
  }
  const manifestPath = opts.manifest ?? join(outDir, "manifest.csv");
  writeManifest(manifestPath, rows);
  console.log(`exported ${rows.length} files -> ${outDir} ` +
    `(${skipped} skipped), manifest: ${manifestPath}`);
}

function writeExport(wavPath: string, dimfPath: string, weights: any,
                     layer: number): ManifestRow {
  const result = exportFeatures(wavPath, weights, layer);
  writeDimf(dimfPath, result.track);
  console.log(`exported ${dimfPath} (${result.track.frames} x ` +
    `${result.track.channels} at ${result.track.frameRateHz} Hz)`);
  return {
    wavPath,
    dimfPath,
    frames: result.track.frames,
    channels: result.track.channels,
    frameRateHz: result.track.frameRateHz,
  };
}

program.parse();
