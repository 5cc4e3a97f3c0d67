/** Subprocess bridge to the evaluation engine's command line interface. */

import { spawnSync } from "node:child_process";

export class EngineError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(message);
  }
}

export class InputError extends EngineError {} // exit code 2
export class ValidationError extends EngineError {} // exit code 3

function command(): { cmd: string; prefix: string[] } {
  const override = process.env.UPQEVAL_CLI;
  if (override) {
    const parts = override.split(/\s+/);
    return { cmd: parts[0], prefix: parts.slice(1) };
  }
  return { cmd: "python3", prefix: ["-m", "upqeval"] };
}

export function runCli(args: string[]): string {
  const { cmd, prefix } = command();
  const proc = spawnSync(cmd, [...prefix, ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new EngineError(`failed to launch ${cmd}: ${proc.error.message}`, -1, "");
  }
  if (proc.status !== 0) {
    const message = `engine exited with ${proc.status}: ${proc.stderr.trim()}`;
    if (proc.status === 2) throw new InputError(message, 2, proc.stderr);
    if (proc.status === 3) throw new ValidationError(message, 3, proc.stderr);
    throw new EngineError(message, proc.status ?? -1, proc.stderr);
  }
  return proc.stdout;
}
