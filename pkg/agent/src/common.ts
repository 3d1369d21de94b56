// Shared agent plumbing: marker constants, the synchronous file logger,
// and stack capture.  Compiled as a global script and concatenated with
// the mode-specific parts into one self-contained snippet, so every name
// is prefixed __gh to stay out of the test program's way.

const __GH_MARKER = "0xEFFACED";
const __GH_FORIN_SENTINEL = "__ghunter_forin__";

const __ghFs = require("fs");
const __ghLogPath: string | undefined = process.env.GHUNTER_LOG;
let __ghLogBroken = false;

// True while the agent runs its own handlers; interception suspends so
// a polluted lookup inside the logger cannot feed back into the agent.
let __ghAgentBusy = false;

// Appends exactly one protocol line per call, synchronously, so records
// survive an immediately following crash.  The agent must never crash
// the test: write failures are reported once, then swallowed.
function __ghLog(kind: string, payload: Record<string, unknown>): void {
  if (!__ghLogPath || __ghLogBroken) {
    return;
  }
  try {
    __ghFs.appendFileSync(
      __ghLogPath,
      "GH1\t" + kind + "\t" + JSON.stringify(payload) + "\n"
    );
  } catch (err) {
    __ghLogBroken = true;
    try {
      __ghFs.appendFileSync(
        __ghLogPath,
        "GH1\tAGENT_ERR\t" + JSON.stringify({ msg: "log write failed: " + String(err) }) + "\n"
      );
    } catch {
      // nothing left to do
    }
  }
}

// Current stack as rendered frame strings, with the agent's own frames
// (all named __gh*) dropped so analysis sees only program frames.
function __ghStack(): string[] {
  const raw = new Error().stack || "";
  const out: string[] = [];
  for (const line of raw.split("\n").slice(1)) {
    if (line.indexOf("__gh") !== -1) {
      continue;
    }
    const frame = line.trim();
    if (frame) {
      out.push(frame);
    }
  }
  return out;
}

function __ghSuppressedProps(): Set<string> {
  // Hot speculative lookups that would flood stage 1 on any runtime,
  // plus the for-in sentinel: it is the pipeline's own artifact, never a
  // property worth polluting in stage 2.
  const suppressed = new Set<string>([
    "then",
    "toJSON",
    "inspect",
    __GH_FORIN_SENTINEL,
  ]);
  for (const name of (process.env.GHUNTER_SUPPRESS || "").split(",")) {
    if (name) {
      suppressed.add(name);
    }
  }
  return suppressed;
}
