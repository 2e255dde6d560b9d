/** Export manifest: one CSV row per written DIMF file. */

import { writeFileSync } from "node:fs";

export interface ManifestRow {
  wavPath: string;
  dimfPath: string;
  frames: number;
  channels: number;
  frameRateHz: number;
}

const HEADER = "wav_path,dimf_path,frames,channels,frame_rate_hz";

function field(value: string): string {
  // Quote only when the delimiter or quotes appear in the path.
  if (/[",\n]/.test(value)) return `"${value.replace(/"/g, '""')}"`;
  return value;
}

export function manifestCsv(rows: ManifestRow[]): string {
  const lines = rows.map((r) =>
    [field(r.wavPath), field(r.dimfPath), String(r.frames), String(r.channels),
     String(r.frameRateHz)].join(","));
  return [HEADER, ...lines].join("\n") + "\n";
}

export function writeManifest(path: string, rows: ManifestRow[]): void {
  writeFileSync(path, manifestCsv(rows));
}
