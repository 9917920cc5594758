import { spawnSync } from "node:child_process";

/** Error categories mirror the CLI exit codes. */
export type ErrorCategory = "usage" | "parse" | "analysis" | "internal";

export class ScorelineError extends Error {
  readonly category: ErrorCategory;
  readonly exitCode: number;

  constructor(category: ErrorCategory, exitCode: number, message: string) {
    super(message);
    this.name = "ScorelineError";
    this.category = category;
    this.exitCode = exitCode;
  }
}

const CATEGORY_OF_EXIT: Record<number, ErrorCategory> = {
  1: "usage",
  2: "parse",
  3: "analysis",
};

function interpreter(): string[] {
  const override = process.env.SCORELINE_PYTHON;
  if (override) {
    return override.split(" ");
  }
  return ["python3"];
}

/** Run one scoreline CLI invocation and return its stdout. */
export function runCli(args: string[]): string {
  const [command, ...prefix] = interpreter();
  const result = spawnSync(command, [...prefix, "-m", "scoreline", ...args], {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) {
    throw new ScorelineError("internal", -1, String(result.error));
  }
  if (result.status !== 0) {
    const category = CATEGORY_OF_EXIT[result.status ?? -1] ?? "internal";
    const message = (result.stderr || "").trim() || `exit code ${result.status}`;
    throw new ScorelineError(category, result.status ?? -1, message);
  }
  return result.stdout;
}
