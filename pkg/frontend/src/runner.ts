/** Subprocess bridge to the toolkit CLI (override with OVERTOK_BIN). */

import { execFileSync } from "node:child_process";

export class CliError extends Error {
  constructor(
    message: string,
    readonly exitCode: number,
  ) {
    super(message);
    this.name = "CliError";
  }
}

export function runCli(args: string[]): string {
  const bin = process.env.OVERTOK_BIN ?? "overtok";
  try {
    return execFileSync(bin, args, { encoding: "utf8", maxBuffer: 1 << 28 });
  } catch (err) {
    const e = err as { status?: number | null; stderr?: string; message?: string };
    const detail = (e.stderr ?? e.message ?? "").toString().trim();
    throw new CliError(`overtok ${args[0]} failed: ${detail}`, e.status ?? -1);
  }
}
