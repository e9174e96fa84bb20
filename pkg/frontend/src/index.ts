/**
 * Thin client over the overtok toolkit: open or build a factor index,
 * stream passages against it, and collect audit records. All matching,
 * counting, tie-breaking and formatting happens in the toolkit itself;
 * this package only marshals token arrays through the CLI's file
 * formats, so results are identical to direct CLI use.
 */

import { randomUUID } from "node:crypto";
import {
  closeSync,
  mkdirSync,
  mkdtempSync,
  openSync,
  readFileSync,
  readSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { writeTokenFile } from "./ovtk.js";
import { runCli } from "./runner.js";

const INDEX_MAGIC = "CDWG";

export interface OverlapSummary {
  passage_id: string | number;
  passage_len: number;
  max_len: number;
  max_end_positions: number[];
  overlaps: { token_ids: number[]; frequency: number | null }[];
  max_frequency: number | null;
  lengths?: number[];
}

export interface OverlapRecord {
  corpus_id: string;
  passage_id: string | number;
  passage_len: number;
  overlap_len: number;
  overlap_frequency: number | null;
  overlap_token_ids: number[];
  overlap_text: string | null;
  ngram_log_prob: number | null;
  appear_prob: number | null;
  improbable: boolean | null;
  partial_word_boundary: boolean | null;
}

export interface ChanceOptions {
  arpa: string;
  corpusWords: number;
  alpha?: number;
}

export type Passage = number[] | string | { id: string | number; tokens: number[] };

/** Opaque reference to a loaded index; query methods throw once closed. */
export class IndexHandle {
  private closed = false;

  constructor(
    readonly indexPath: string,
    readonly vocabSize: number,
    readonly boundaryId: number,
    private readonly ownedDir: string | null,
    /** An id guaranteed absent from the corpus, or null if unknown. */
    readonly reservedId: number | null = null,
  ) {}

  get isClosed(): boolean {
    return this.closed;
  }

  assertOpen(): void {
    if (this.closed) {
      throw new Error("index handle is closed");
    }
  }

  close(): void {
    if (!this.closed && this.ownedDir) {
      rmSync(this.ownedDir, { recursive: true, force: true });
    }
    this.closed = true;
  }

  scratchDir(): string {
    return this.ownedDir ?? tmpdir();
  }
}

function readIndexHeader(path: string): { vocabSize: number } {
  const buf = Buffer.alloc(20);
  const fd = openSync(path, "r");
  try {
    const got = readSync(fd, buf, 0, 20, 0);
    if (got < 20 || buf.toString("ascii", 0, 4) !== INDEX_MAGIC) {
      throw new Error(`${path}: not an index file`);
    }
  } finally {
    closeSync(fd);
  }
  return { vocabSize: buf.readUInt32LE(16) };
}

/** Open a serialized index file; validation of the body happens on first query. */
export function open_index(path: string): IndexHandle {
  const { vocabSize } = readIndexHeader(path);
  return new IndexHandle(path, vocabSize, vocabSize - 1, null);
}

/**
 * Build an index over token-id arrays. The top id of the declared vocab
 * is reserved as the document boundary, so ids must stay below
 * vocabSize - 1 (default: largest id + 2).
 */
export function build_index(
  docs: number[][],
  withCounts = true,
  options: { vocabSize?: number } = {},
): IndexHandle {
  if (!docs.length) {
    throw new Error("build_index needs at least one document");
  }
  let maxTok = 0;
  for (const doc of docs) for (const t of doc) maxTok = Math.max(maxTok, t);
  const vocabSize = options.vocabSize ?? maxTok + 2;
  if (maxTok >= vocabSize - 1) {
    throw new Error(
      `token id ${maxTok} collides with the reserved boundary ${vocabSize - 1}`,
    );
  }
  const dir = mkdtempSync(join(tmpdir(), "overtok-"));
  const corpusPath = join(dir, "corpus.ovtk");
  const indexPath = join(dir, "index.cdwg");
  writeTokenFile(corpusPath, docs, vocabSize, vocabSize - 1);
  const args = ["build", "--input", corpusPath, "--format", "tokens", "--output", indexPath];
  if (withCounts) args.push("--counts");
  runCli(args);
  // the boundary id never occurs inside documents, so it can absorb
  // out-of-vocabulary query tokens without changing any match
  return new IndexHandle(indexPath, vocabSize, vocabSize - 1, dir, vocabSize - 1);
}

function sanitizeTokens(handle: IndexHandle, tokens: number[]): number[] {
  if (tokens.every((t) => t >= 0 && t < handle.vocabSize)) {
    return tokens;
  }
  if (handle.reservedId === null) {
    throw new Error(
      `query contains ids outside the index vocabulary (size ${handle.vocabSize}); ` +
        "rebuild with vocabSize headroom or keep query ids in range",
    );
  }
  const sub = handle.reservedId;
  return tokens.map((t) => (t >= 0 && t < handle.vocabSize ? t : sub));
}

function pickBoundary(tokens: number[], vocabSize: number): number {
  const present = new Set(tokens);
  for (let b = vocabSize - 1; b >= 0; b--) {
    if (!present.has(b)) return b;
  }
  throw new Error("passage uses every id in the vocabulary; cannot pick a boundary");
}

function queryOnce(handle: IndexHandle, tokens: number[], perPosition: boolean): OverlapSummary {
  handle.assertOpen();
  if (!tokens.length) {
    return {
      passage_id: 0,
      passage_len: 0,
      max_len: 0,
      max_end_positions: [],
      overlaps: [],
      max_frequency: null,
      lengths: [],
    };
  }
  const clean = sanitizeTokens(handle, tokens);
  const passagePath = join(handle.scratchDir(), `passage-${randomUUID()}.ovtk`);
  writeTokenFile(passagePath, [clean], handle.vocabSize, pickBoundary(clean, handle.vocabSize));
  try {
    const args = ["query", "--index", handle.indexPath, "--passage", passagePath];
    if (perPosition) args.push("--per-position");
    return JSON.parse(runCli(args).trim()) as OverlapSummary;
  } finally {
    rmSync(passagePath, { force: true });
  }
}

/** Longest-occurring-suffix length at every token position of the passage. */
export function matching_lengths(handle: IndexHandle, tokens: number[]): number[] {
  return queryOnce(handle, tokens, true).lengths ?? [];
}

/** Globally longest overlapping sequence(s) with the highest tie frequency. */
export function longest_overlap(handle: IndexHandle, tokens: number[]): OverlapSummary {
  return queryOnce(handle, tokens, false);
}

/**
 * Audit passages against the index, returning one record per passage in
 * input order with the toolkit's JSONL field names. Chance scoring needs
 * an index built from raw text (it carries the word sidecar).
 */
export function analyze(
  handle: IndexHandle,
  passages: Passage[],
  chance?: ChanceOptions,
): OverlapRecord[] {
  handle.assertOpen();
  if (!passages.length) {
    throw new Error("analyze needs at least one passage");
  }
  const workDir = mkdtempSync(join(handle.scratchDir(), "analyze-"));
  try {
    const passageDir = join(workDir, "passages");
    mkdirSync(passageDir);
    const userIds = new Map<string, string | number>();
    passages.forEach((p, i) => {
      const stem = `p${String(i).padStart(5, "0")}`;
      if (typeof p === "string") {
        writeFileSync(join(passageDir, `${stem}.txt`), p);
        userIds.set(stem, stem);
      } else {
        const tokens = sanitizeTokens(handle, Array.isArray(p) ? p : p.tokens);
        writeTokenFile(
          join(passageDir, `${stem}.ovtk`),
          [tokens],
          handle.vocabSize,
          pickBoundary(tokens, handle.vocabSize),
        );
        userIds.set(stem, Array.isArray(p) ? i : p.id);
      }
    });
    const reportPath = join(workDir, "report.jsonl");
    const args = [
      "analyze",
      "--index",
      handle.indexPath,
      "--passages",
      passageDir,
      "--output",
      reportPath,
    ];
    if (chance) {
      args.push("--arpa", chance.arpa, "--corpus-words", String(chance.corpusWords));
      if (chance.alpha !== undefined) args.push("--alpha", String(chance.alpha));
    }
    runCli(args);
    const records = readFileSync(reportPath, "utf8")
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as OverlapRecord);
    for (const record of records) {
      const mapped = userIds.get(String(record.passage_id));
      if (mapped !== undefined) record.passage_id = mapped;
    }
    return records;
  } finally {
    rmSync(workDir, { recursive: true, force: true });
  }
}
