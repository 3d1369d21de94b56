// Black-box harness: every test runs a real `node` child with one of the
// built snippets prepended, exactly as the pipeline injects them, and
// reads back the wire-protocol log.

import {
  mkdtempSync,
  readFileSync,
  writeFileSync,
  existsSync,
  readdirSync,
} from "node:fs";
import { spawnSync } from "node:child_process";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

export const AGENT_DIR = resolve(__dirname, "..", "dist");
export const REPO = resolve(__dirname, "..", "..");
export const MARKER = "0xEFFACED";
export const FORIN_SENTINEL = "__ghunter_forin__";

export interface WireRecord {
  kind: string;
  payload: any;
}

export interface AgentRun {
  exitCode: number | null;
  signal: string | null;
  stdout: string;
  stderr: string;
  records: WireRecord[];
  rawLog: string;
}

export function parseLog(text: string): WireRecord[] {
  const records: WireRecord[] = [];
  for (const line of text.split("\n")) {
    const parts = line.split("\t");
    if (parts.length !== 3 || parts[0] !== "GH1") continue;
    records.push({ kind: parts[1], payload: JSON.parse(parts[2]) });
  }
  return records;
}

export interface RunOptions {
  snippet?: "collect" | "hunt" | "crash" | null;
  prop?: string;
  type?: "string" | "object" | "forin";
  suppress?: string;
  timeoutMs?: number;
  /** Override GHUNTER_LOG (e.g. with an unwritable path). */
  logPath?: string;
}

export function runAgent(program: string, opts: RunOptions = {}): AgentRun {
  const dir = mkdtempSync(join(tmpdir(), "ghagent-"));
  const logPath = opts.logPath ?? join(dir, "agent.log");
  let source = program;
  if (opts.snippet) {
    const snippet = readFileSync(join(AGENT_DIR, `${opts.snippet}.js`), "utf8");
    source = snippet + "\n" + program;
  }
  const testPath = join(dir, "t.js");
  writeFileSync(testPath, source);

  const env: Record<string, string> = {
    PATH: process.env.PATH ?? "",
    GHUNTER_LOG: logPath,
  };
  if (opts.prop !== undefined) {
    env.GHUNTER_PROP = opts.prop;
    env.GHUNTER_TYPE = opts.type ?? "string";
  }
  if (opts.suppress !== undefined) env.GHUNTER_SUPPRESS = opts.suppress;

  const child = spawnSync("node", [testPath], {
    cwd: dir,
    env,
    encoding: "utf8",
    timeout: opts.timeoutMs ?? 20_000,
  });
  const rawLog = existsSync(logPath) ? readFileSync(logPath, "utf8") : "";
  return {
    exitCode: child.status,
    signal: child.signal,
    stdout: child.stdout ?? "",
    stderr: child.stderr ?? "",
    records: parseLog(rawLog),
    rawLog,
  };
}

export function ofKind(run: AgentRun, kind: string): WireRecord[] {
  return run.records.filter((r) => r.kind === kind);
}

/** All files named `fileName` anywhere under `root` (sorted). */
export function findFiles(root: string, fileName: string): string[] {
  const found: string[] = [];
  const stack = [root];
  while (stack.length) {
    const dir = stack.pop()!;
    let entries;
    try {
      entries = readdirSync(dir, { withFileTypes: true });
    } catch {
      continue;
    }
    for (const entry of entries) {
      const full = join(dir, entry.name);
      if (entry.isDirectory()) stack.push(full);
      else if (entry.name === fileName) found.push(full);
    }
  }
  return found.sort();
}
