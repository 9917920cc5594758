/** Thin bindings over the scoreline CLI.
 *
 * Every operation delegates 1:1 to a CLI subcommand; no musical logic
 * lives in this layer.  Handles are frozen descriptors of an input file
 * plus how to read it (score or performance).
 */

import { runCli, ScorelineError } from "./cli.js";
import { parseCsv, Row } from "./csv.js";

export { ScorelineError } from "./cli.js";
export type { ErrorCategory } from "./cli.js";
export type { Row } from "./csv.js";

export interface Handle {
  readonly path: string;
  readonly reading: "score" | "performance";
}

export interface AlignmentPair {
  readonly label: "match" | "insertion" | "deletion" | "ornament";
  readonly scoreId: string | null;
  readonly perfId: string | null;
}

export interface PianoRoll {
  readonly rows: number;
  readonly cols: number;
  readonly cells: ReadonlyArray<readonly [number, number, number]>;
}

function makeHandle(path: string, reading: "score" | "performance"): Handle {
  return Object.freeze({ path, reading });
}

/** Load a score file (MusicXML, kern, MEI, or MIDI read as a score). */
export function load_score(path: string): Handle {
  runCli(["notearray", path, "--as", "score"]);
  return makeHandle(path, "score");
}

/** Load a MIDI file (or the performance side of a match file). */
export function load_performance(path: string): Handle {
  runCli(["notearray", path, "--as", "performance"]);
  return makeHandle(path, "performance");
}

/** Load a match file: the performance handle plus the alignment pairs. */
export function load_match(path: string): [Handle, AlignmentPair[]] {
  const text = runCli(["align", path, "--pairs"]);
  const pairs = parseCsv(text).map((row) => Object.freeze({
    label: String(row.label) as AlignmentPair["label"],
    scoreId: row.score_id === "" ? null : String(row.score_id),
    perfId: row.perf_id === "" ? null : String(row.perf_id),
  }));
  runCli(["notearray", path, "--as", "performance"]);
  return [makeHandle(path, "performance"), pairs];
}

function readingArgs(handle: Handle): string[] {
  return ["--as", handle.reading];
}

/** Per-note feature records (columns depend on the handle kind). */
export function note_array(handle: Handle, includeTimeSignature = false): Row[] {
  const args = ["notearray", handle.path, ...readingArgs(handle)];
  if (includeTimeSignature) {
    args.push("--include-time-signature");
  }
  return parseCsv(runCli(args));
}

/** Sparse piano roll as coordinate triples. */
export function compute_pianoroll(
  handle: Handle,
  timeDiv: number,
  pianoRange = false,
): PianoRoll {
  const args = ["pianoroll", handle.path, "--time-div", String(timeDiv),
                ...readingArgs(handle)];
  if (pianoRange) {
    args.push("--piano-range");
  }
  const lines = runCli(args).split("\n").filter((line) => line.length > 0);
  const [rows, cols] = lines[0].split(",").map(Number);
  const cells = lines.slice(1).map((line) => {
    const [r, c, v] = line.split(",").map(Number);
    return Object.freeze([r, c, v] as const);
  });
  return Object.freeze({ rows, cols, cells });
}

/** Analysis estimators, mirroring the primary library's analysis module. */
export const musicanalysis = Object.freeze({
  estimate_key(handle: Handle): string {
    return runCli(["analyze", handle.path, "--key", ...readingArgs(handle)]).trim();
  },

  estimate_spelling(handle: Handle): Row[] {
    return parseCsv(runCli(
      ["analyze", handle.path, "--spelling", ...readingArgs(handle)]));
  },

  estimate_voices(handle: Handle): Row[] {
    return parseCsv(runCli(
      ["analyze", handle.path, "--voices", ...readingArgs(handle)]));
  },
});
